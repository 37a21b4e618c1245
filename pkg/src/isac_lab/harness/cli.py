"""Command line entry point (``isac-lab``).

Exit codes: 0 success, 1 configuration error, 2 runtime error. The seed is
taken from ``--seed``, else ``$ISAC_LAB_SEED``, else the scenario or default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import numerics, radar
from ..exceptions import ConfigError, InvalidArgumentError
from ..detection import bits_to_grid
from ..waveform import WaveformConfig, WaveformKind, block_samples, qam16_map
from .output import emit_csv, emit_svg_plot
from .scenario import load_scenario
from .sweep import run_ber_sweep

log = logging.getLogger("isac_lab")

SEED_ENV = "ISAC_LAB_SEED"


def _resolve_seed(flag: int | None, default: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer", SEED_ENV) from None
    return default


def _read_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from None


def _per_preset_path(out: Path, preset: str, many: bool) -> Path:
    return out.with_name(f"{out.stem}_{preset}{out.suffix}") if many else out


def cmd_ber(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1", "workers")
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {args.scenario}: {exc}") from None
    scenario = scenario.with_seed(_resolve_seed(args.seed, scenario.master_seed))
    if args.frames is not None:
        scenario = replace(scenario, frames=args.frames)
    curves = run_ber_sweep(scenario, workers=args.workers,
                           progress=lambda p, s: log.info("finished %s at %g dB", p, s))
    many = len(curves) > 1
    out = Path(args.out)
    for curve in curves:
        path = emit_csv(curve, _per_preset_path(out, curve.preset, many))
        print(f"wrote {path}")
    if args.svg:
        svg = Path(args.svg)
        if many:
            for curve in curves:
                emit_svg_plot(curve, _per_preset_path(svg, curve.preset, True), title=curve.preset)
        else:
            emit_svg_plot(curves, svg, title=curves[0].preset)
    return 0


def cmd_fmcw(args) -> int:
    doc = _read_json(args.config, "FMCW config")
    if not isinstance(doc, dict):
        raise ConfigError("FMCW config must be a JSON object")
    doc = dict(doc)
    snr_db = doc.pop("snr_db", None)
    try:
        cfg = radar.FmcwConfig.from_dict(doc)
        tdoc = _read_json(args.targets, "target list")
        targets = [radar.Target(**t) for t in tdoc]
    except (InvalidArgumentError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    rng = np.random.default_rng(_resolve_seed(args.seed, 0))
    beats = radar.fmcw_beat(cfg, targets, rng, snr_db)
    rd = radar.fmcw_range_doppler(beats, cfg, window=args.window)
    emit_csv(rd, args.out)
    r, v = rd.peak()
    print(f"peak at range {r:.4f} m, velocity {v:.4f} m/s")
    return 0


def cmd_ofdm_radar(args) -> int:
    doc = _read_json(args.config, "OFDM radar config")
    try:
        cfg = radar.OfdmRadarConfig.from_dict(doc)
        l, a = (int(x) for x in args.shift.split(","))
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad OFDM radar arguments: {exc}") from None
    rng = np.random.default_rng(_resolve_seed(args.seed, 0))
    bits = rng.integers(0, 2, size=(cfg.n_subcarriers, cfg.n_symbols * 4))
    tx = qam16_map(bits)
    rx = radar.shifted_rx(tx, l, a)
    rd = radar.ofdm_radar_process(tx, rx, cfg)
    emit_csv(rd, args.out)
    dop, rng_bin = rd.peak_bins()
    print(f"peak at delay bin {rng_bin}, Doppler bin {dop} (range {rng_bin * rd.range_bin_m:.4f} m)")
    return 0


def cmd_papr(args) -> int:
    try:
        kind = WaveformKind.parse(args.waveform)
        chirp = numerics.ChirpParams.for_doppler_spread(args.n, 3) if kind is WaveformKind.AFDM else None
        cfg = WaveformConfig(kind, args.n, 1, 0, chirp)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1", "frames")
    rng = np.random.default_rng(_resolve_seed(args.seed, 0))
    bits = rng.integers(0, 2, size=(args.frames, cfg.bits_per_frame), dtype=np.uint8)
    samples = block_samples(cfg, bits_to_grid(cfg, bits))[..., 0]
    values = radar.papr_db(samples)
    thresholds = np.round(np.arange(0.0, 14.0001, 0.1), 1)
    tail = radar.ccdf(values, thresholds)
    lines = ["papr_db,ccdf"] + [f"{t:.1f},{float(c)!r}" for t, c in zip(thresholds, tail)]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{kind.value}: PAPR exceeded with probability 1e-2 at {np.quantile(values, 0.99):.3f} dB")
    return 0


def cmd_stepped(args) -> int:
    if args.m < 1 or args.n_sub < 1:
        raise ConfigError("--m and --n-sub must be >= 1")
    plan = radar.SteppedPlan.sequential(args.m, args.n_sub, args.sub_bandwidth, f_c=args.f_c,
                                        sub_symbol_duration=args.sub_symbol_duration)
    subs = radar.stepped_point_target(plan, args.range)
    profile = radar.stepped_carrier_combine(subs, plan, oversample=args.oversample)
    emit_csv(profile, args.out)
    peak = int(np.argmax(profile.magnitudes[:, 0]))
    print(f"range bin {profile.range_bin_m:.6g} m, peak at {peak * profile.range_bin_m:.4f} m, "
          f"unambiguous velocity {profile.max_velocity_mps:.6g} m/s")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isac-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber", help="Monte Carlo BER sweep")
    p.add_argument("--scenario", required=True, help="scenario JSON file or built-in name (fig5)")
    p.add_argument("--out", required=True, help="CSV path; suffixed with the preset when several are swept")
    p.add_argument("--svg")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--frames", type=int, help="override the scenario's frame count")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("fmcw", help="FMCW range-Doppler map")
    p.add_argument("--config", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--window", default="rect", choices=["rect", "hann"])
    p.set_defaults(func=cmd_fmcw)

    p = sub.add_parser("ofdm-radar", help="OFDM radar periodogram of a shifted echo")
    p.add_argument("--config", required=True)
    p.add_argument("--shift", required=True, help="delay,Doppler bins, e.g. 5,2")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ofdm_radar)

    p = sub.add_parser("papr", help="PAPR CCDF of random 16-QAM frames")
    p.add_argument("--waveform", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_papr)

    p = sub.add_parser("stepped", help="stepped-carrier range profile of a point target")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-sub", type=int, default=64)
    p.add_argument("--sub-bandwidth", type=float, default=250e6)
    p.add_argument("--sub-symbol-duration", type=float, default=1e-6)
    p.add_argument("--f-c", type=float, default=77e9)
    p.add_argument("--range", type=float, default=10.0)
    p.add_argument("--oversample", type=int, default=1)
    p.set_defaults(func=cmd_stepped)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
