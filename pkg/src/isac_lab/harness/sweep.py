"""Monte Carlo BER sweeps.

Frames are processed in fixed chunks of ``CHUNK_FRAMES``. Frame ``f`` at SNR
index ``s`` of preset index ``p`` draws everything from
``child_seed(master_seed, p, s, f)``; the waveform is deliberately *not* part
of the address, so all waveforms of a point see the same bits, channel and
noise (common random numbers). Chunk results are integer error counts reduced
in chunk order, which makes the output independent of the worker count.

Each point also keeps the sum of squared per-frame error counts. Bits within
a frame share one channel draw, so the binomial standard error understates
the Monte Carlo error; :attr:`BerPoint.frame_std_error` treats frames as the
independent unit instead.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..detection import BatchLink
from .scenario import Scenario
from .seeding import child_seed

CHUNK_FRAMES = 64
Z95 = 1.959963984540054


def wilson_interval(errors: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = errors / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    return min(max(centre - half, 0.0), p), max(min(centre + half, 1.0), p)


@dataclass(frozen=True)
class BerPoint:
    waveform: str
    snr_db: float
    bits: int
    errors: int
    frames: int = 0
    errors_sq: int = 0

    @property
    def ber(self) -> float:
        return self.errors / self.bits

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.bits)

    @property
    def std_error(self) -> float:
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits)

    @property
    def frame_std_error(self) -> float:
        """Standard error of the BER with frames as i.i.d. replications."""
        f = self.frames
        if f < 2:
            return math.nan
        var = (self.errors_sq - self.errors * self.errors / f) / (f - 1)
        return math.sqrt(max(var, 0.0) / f) / (self.bits / f)


@dataclass
class BerCurve:
    preset: str
    points: list[BerPoint] = field(default_factory=list)

    def point(self, waveform: str, snr_db: float) -> BerPoint:
        for p in self.points:
            if p.waveform == waveform and p.snr_db == snr_db:
                return p
        raise KeyError((waveform, snr_db))

    @property
    def waveforms(self) -> list[str]:
        return list(dict.fromkeys(p.waveform for p in self.points))

    def series(self, waveform: str) -> list[BerPoint]:
        return [p for p in self.points if p.waveform == waveform]


@functools.lru_cache(maxsize=16)
def _link(cfgs: tuple, preset: str, continuous_phase: bool, redraw: str, equalization: str) -> BatchLink:
    return BatchLink(cfgs, preset, continuous_phase=continuous_phase, redraw=redraw, equalization=equalization)


def _run_chunk(task) -> np.ndarray:
    scenario, p_idx, s_idx, start, stop = task
    preset = scenario.presets[p_idx]
    link = _link(tuple(scenario.waveform_configs(preset)), preset, scenario.continuous_phase,
                 scenario.redraw, scenario.equalization)
    seeds = [child_seed(scenario.master_seed, p_idx, s_idx, f) for f in range(start, stop)]
    snr = None if scenario.noiseless else scenario.snr_grid[s_idx]
    errs = link.run(snr, seeds).astype(np.int64)
    return np.stack([errs.sum(axis=1), (errs * errs).sum(axis=1)])


def _chunks(frames: int) -> list[tuple[int, int]]:
    return [(a, min(a + CHUNK_FRAMES, frames)) for a in range(0, frames, CHUNK_FRAMES)]


def run_ber_sweep(scenario: Scenario, workers: int = 1, progress=None) -> list[BerCurve]:
    """BER curves for every preset of ``scenario`` (one :class:`BerCurve` each).

    Args:
        scenario: What to simulate.
        workers: Process count; results are identical for any value.
        progress: Optional callable ``(preset, snr_db)`` invoked per finished point.
    """
    n_wf = len(scenario.waveforms)
    bits_per_frame = 4 * scenario.N * scenario.M
    chunks = _chunks(scenario.frames)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    mapper = pool.map if pool is not None else map
    curves = []
    try:
        for p_idx, preset in enumerate(scenario.presets):
            curve = BerCurve(preset)
            # Fail fast on invalid configuration before dispatching work.
            scenario.waveform_configs(preset)
            for s_idx, snr in enumerate(scenario.snr_grid):
                errors = np.zeros(n_wf, dtype=np.int64)
                errors_sq = np.zeros(n_wf, dtype=np.int64)
                frames = np.zeros(n_wf, dtype=np.int64)
                active = np.ones(n_wf, dtype=bool)
                wave = len(chunks) if scenario.min_errors is None else max(workers, 1)
                for w0 in range(0, len(chunks), wave):
                    batch = chunks[w0:w0 + wave]
                    tasks = [(scenario, p_idx, s_idx, a, b) for a, b in batch]
                    for (a, b), (chunk_err, chunk_sq) in zip(batch, mapper(_run_chunk, tasks)):
                        errors[active] += chunk_err[active]
                        errors_sq[active] += chunk_sq[active]
                        frames[active] += b - a
                        if scenario.min_errors is not None:
                            active &= errors < scenario.min_errors
                    if not active.any():
                        break
                for k, name in enumerate(scenario.waveforms):
                    curve.points.append(
                        BerPoint(
                            name, snr, int(frames[k]) * bits_per_frame, int(errors[k]),
                            int(frames[k]), int(errors_sq[k]),
                        )
                    )
                if progress is not None:
                    progress(preset, snr)
            curves.append(curve)
    finally:
        if pool is not None:
            pool.shutdown()
    for curve in curves:
        curve.points.sort(key=lambda p: (scenario.waveforms.index(p.waveform), p.snr_db))
    return curves
