"""BER sweep scenarios and their JSON schema.

A scenario document is a JSON object::

    {
      "name": "fig5",                       # optional
      "waveforms": ["OCDM", "AFDM"],        # required; OFDM, OCDM, AFDM, OTFS
      "preset": "doubly-sel",               # required; a name or a list of names
      "snr_grid": [0, 5, 10],               # required; strictly increasing dB values
      "frames": 20000,                      # required; frames per (waveform, SNR) point
      "master_seed": 0,                     # optional, default 0
      "N": 64, "M": 4, "prefix_len": 2,     # optional
      "stop_rule": {"min_errors": 500},     # optional early stop per point
      "doppler_phase": "block",             # optional; "block" or "continuous"
      "channel_redraw": "frame",            # optional; "frame" or "block"
      "equalization": "block",              # optional; "block" or "frame" (joint MMSE)
      "otfs_frame_prefix": false,           # optional
      "afdm_chirp": {"c1": 0.05, "c2": 0.0001},  # optional fixed AFDM chirp
      "noiseless": false                    # optional; drop the AWGN (grid values become labels)
    }

Without ``afdm_chirp`` AFDM uses ``c1 = (2 a_max + 1)/(2N)``, ``c2 = 1/(2N^2)``
with ``a_max`` taken from each preset's Doppler support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from ..channel import ChannelPreset, preset_support
from ..exceptions import ConfigError, InvalidArgumentError
from ..numerics import ChirpParams
from ..waveform import WaveformConfig, WaveformKind

_REQUIRED = ("waveforms", "preset", "snr_grid", "frames")
_OPTIONAL = (
    "name", "master_seed", "N", "M", "prefix_len", "stop_rule",
    "doppler_phase", "otfs_frame_prefix", "afdm_chirp", "noiseless",
    "channel_redraw", "equalization",
)


@dataclass(frozen=True)
class Scenario:
    waveforms: tuple[str, ...]
    presets: tuple[str, ...]
    snr_grid: tuple[float, ...]
    frames: int
    master_seed: int = 0
    N: int = 64
    M: int = 4
    prefix_len: int = 2
    min_errors: int | None = None
    continuous_phase: bool = False
    otfs_frame_prefix: bool = False
    afdm_chirp: tuple[float, float] | None = None
    noiseless: bool = False
    redraw: str = "frame"
    equalization: str = "block"
    name: str = "custom"

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError("frames must be >= 1", "frames")
        if not self.snr_grid or any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ConfigError("snr_grid must be non-empty and strictly increasing", "snr_grid")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0", "master_seed")
        if not self.waveforms:
            raise ConfigError("waveforms must not be empty", "waveforms")
        if self.redraw not in ("frame", "block"):
            raise ConfigError("redraw must be 'frame' or 'block'", "channel_redraw")
        if self.equalization not in ("block", "frame"):
            raise ConfigError("equalization must be 'block' or 'frame'", "equalization")
        if self.redraw == "block" and "OTFS" in self.waveforms:
            raise ConfigError("per-block channel redraw is not defined for OTFS", "channel_redraw")

    def with_seed(self, seed: int) -> Scenario:
        return replace(self, master_seed=int(seed))

    def waveform_configs(self, preset: str) -> list[WaveformConfig]:
        """Concrete waveform configurations for one channel preset."""
        support = preset_support(preset)
        a_max = max(abs(a) for _, a in support)
        out = []
        for name in self.waveforms:
            kind = WaveformKind.parse(name)
            chirp = None
            if kind is WaveformKind.AFDM:
                if self.afdm_chirp is not None:
                    chirp = ChirpParams(self.afdm_chirp[0], self.afdm_chirp[1], self.N)
                else:
                    chirp = ChirpParams.for_doppler_spread(self.N, a_max)
            out.append(WaveformConfig(kind, self.N, self.M, self.prefix_len, chirp,
                                      otfs_frame_prefix=self.otfs_frame_prefix))
        return out


def fig5(frames: int = 20000, master_seed: int = 0) -> Scenario:
    """Built-in OCDM vs AFDM comparison over the three selective presets."""
    return Scenario(
        waveforms=("OCDM", "AFDM"),
        presets=("freq-sel", "time-sel", "doubly-sel"),
        snr_grid=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
        frames=frames,
        master_seed=master_seed,
        N=64,
        M=4,
        prefix_len=2,
        name="fig5",
    )


BUILTIN = {"fig5": fig5}


def _int(doc, key, minimum=None, label=None) -> int:
    label = label or key
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{label!r} must be an integer", label)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{label!r} must be >= {minimum}", label)
    return v


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a parsed JSON document; every error names the offending key."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = sorted(set(doc) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
    for key in _REQUIRED:
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}", key)

    waveforms = doc["waveforms"]
    if not isinstance(waveforms, list) or not waveforms:
        raise ConfigError("'waveforms' must be a non-empty list", "waveforms")
    try:
        waveforms = tuple(WaveformKind.parse(w).value for w in waveforms)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), "waveforms") from None

    presets = doc["preset"]
    presets = [presets] if isinstance(presets, str) else presets
    if not isinstance(presets, list) or not presets:
        raise ConfigError("'preset' must be a name or a non-empty list of names", "preset")
    try:
        presets = tuple(ChannelPreset.parse(p).value for p in presets)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), "preset") from None
    if ChannelPreset.CUSTOM.value in presets:
        raise ConfigError("the custom preset cannot be swept from a scenario file", "preset")

    grid = doc["snr_grid"]
    if not isinstance(grid, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in grid
    ):
        raise ConfigError("'snr_grid' must be a list of finite numbers", "snr_grid")

    kw = {
        "waveforms": waveforms,
        "presets": presets,
        "snr_grid": tuple(float(x) for x in grid),
        "frames": _int(doc, "frames", 1),
    }
    if "name" in doc:
        if not isinstance(doc["name"], str):
            raise ConfigError("'name' must be a string", "name")
        kw["name"] = doc["name"]
    if "master_seed" in doc:
        kw["master_seed"] = _int(doc, "master_seed", 0)
    for key, minimum in (("N", 2), ("M", 1), ("prefix_len", 0)):
        if key in doc:
            kw[key] = _int(doc, key, minimum)
    if "stop_rule" in doc:
        rule = doc["stop_rule"]
        if rule is not None:
            if not isinstance(rule, dict) or set(rule) != {"min_errors"}:
                raise ConfigError("'stop_rule' must be {\"min_errors\": K}", "stop_rule")
            kw["min_errors"] = _int(rule, "min_errors", 1, "stop_rule.min_errors")
    if "doppler_phase" in doc:
        if doc["doppler_phase"] not in ("block", "continuous"):
            raise ConfigError("'doppler_phase' must be 'block' or 'continuous'", "doppler_phase")
        kw["continuous_phase"] = doc["doppler_phase"] == "continuous"
    for key, field_name, allowed in (("channel_redraw", "redraw", ("frame", "block")),
                                     ("equalization", "equalization", ("block", "frame"))):
        if key in doc:
            if doc[key] not in allowed:
                raise ConfigError(f"{key!r} must be one of {list(allowed)}", key)
            kw[field_name] = doc[key]
    if "otfs_frame_prefix" in doc:
        if not isinstance(doc["otfs_frame_prefix"], bool):
            raise ConfigError("'otfs_frame_prefix' must be a boolean", "otfs_frame_prefix")
        kw["otfs_frame_prefix"] = doc["otfs_frame_prefix"]
    if "afdm_chirp" in doc:
        chirp = doc["afdm_chirp"]
        if not isinstance(chirp, dict) or set(chirp) != {"c1", "c2"}:
            raise ConfigError("'afdm_chirp' must be {\"c1\": .., \"c2\": ..}", "afdm_chirp")
        vals = (chirp["c1"], chirp["c2"])
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in vals):
            raise ConfigError("'afdm_chirp' values must be finite numbers", "afdm_chirp")
        kw["afdm_chirp"] = (float(vals[0]), float(vals[1]))
    if "noiseless" in doc:
        if not isinstance(doc["noiseless"], bool):
            raise ConfigError("'noiseless' must be a boolean", "noiseless")
        kw["noiseless"] = doc["noiseless"]

    scenario = Scenario(**kw)
    try:
        for preset in scenario.presets:
            scenario.waveform_configs(preset)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), "prefix_len") from None
    max_delay = max(l for p in scenario.presets for l, _ in preset_support(p))
    if scenario.prefix_len < max_delay:
        raise ConfigError(f"prefix_len must cover the maximum delay {max_delay}", "prefix_len")
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario from a JSON file, or a built-in by name (``fig5``)."""
    if str(path) in BUILTIN:
        return BUILTIN[str(path)]()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc)
