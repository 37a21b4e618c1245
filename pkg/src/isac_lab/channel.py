"""Linear time-variant channel with integer delays and integer Dopplers.

A path with delay ``l`` (samples), Doppler ``a`` (cycles per ``N`` samples) and
gain ``h`` maps the transmitted samples ``s`` to

    r[t] = h * exp(j 2 pi a phi(t) / N) * s[t - l]

Two phase references are supported. By default ``phi(t)`` is measured from the
first useful sample of the block containing ``t`` (so every block of a frame
sees the same matrix); with ``continuous_phase=True`` ``phi(t) = t`` runs across
the whole frame. After prefix removal one block sees

    H = sum_p h_p D(a_p) Gamma_p Pi^{l_p}

with ``D(a) = diag(exp(j 2 pi a n / N))``, ``Pi`` the cyclic down-shift and
``Gamma_p`` the chirp-periodic prefix correction (identity for a cyclic prefix).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .waveform import TimeSignal

L_MAX = 2
A_MAX = 3


class ChannelPreset(str, enum.Enum):
    FREQ_SEL = "freq-sel"
    TIME_SEL = "time-sel"
    DOUBLY_SEL = "doubly-sel"
    IDENTITY = "identity"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, name: str | ChannelPreset) -> ChannelPreset:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown channel preset {name!r}") from None


def preset_support(preset: ChannelPreset | str) -> tuple[tuple[int, int], ...]:
    """(delay, Doppler) pairs of a preset, in the order gains are drawn."""
    preset = ChannelPreset.parse(preset)
    if preset is ChannelPreset.FREQ_SEL:
        return tuple((l, 0) for l in range(L_MAX + 1))
    if preset is ChannelPreset.TIME_SEL:
        return tuple((0, a) for a in range(-A_MAX, A_MAX + 1))
    if preset is ChannelPreset.DOUBLY_SEL:
        return tuple((l, a) for l in range(L_MAX + 1) for a in range(-A_MAX, A_MAX + 1))
    if preset is ChannelPreset.IDENTITY:
        return ((0, 0),)
    raise InvalidArgumentError("the custom preset has no fixed support; pass it explicitly")


@dataclass(frozen=True)
class PathTap:
    delay: int
    doppler: int
    gain: complex


@dataclass(frozen=True)
class ChannelSpec:
    taps: tuple[PathTap, ...]
    preset: ChannelPreset = ChannelPreset.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(self.taps))
        for tap in self.taps:
            if tap.delay < 0 or int(tap.delay) != tap.delay or int(tap.doppler) != tap.doppler:
                raise InvalidArgumentError(f"tap {tap} needs integer delay >= 0 and integer Doppler")

    @classmethod
    def identity(cls) -> ChannelSpec:
        return cls((PathTap(0, 0, 1.0 + 0j),), ChannelPreset.IDENTITY)

    @property
    def delays(self) -> np.ndarray:
        return np.array([t.delay for t in self.taps], dtype=np.intp)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([t.doppler for t in self.taps], dtype=np.intp)

    @property
    def gains(self) -> np.ndarray:
        return np.array([t.gain for t in self.taps], dtype=np.complex128)

    @property
    def max_delay(self) -> int:
        return max((t.delay for t in self.taps), default=0)

    @property
    def max_doppler(self) -> int:
        return max((abs(t.doppler) for t in self.taps), default=0)


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN level per received complex sample; ``snr_db=None`` means no noise."""

    snr_db: float | None

    def __post_init__(self):
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise InvalidArgumentError("snr_db must be finite; use NoiseSpec.none() for a noiseless link")

    @classmethod
    def none(cls) -> NoiseSpec:
        return cls(None)

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None

    @property
    def variance(self) -> float:
        return 0.0 if self.snr_db is None else 10.0 ** (-self.snr_db / 10.0)


def draw_gains(n_paths: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian gains with variance ``1/n_paths``."""
    z = rng.standard_normal(size + (n_paths, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5 / n_paths)


def draw_channel(preset, rng: np.random.Generator, support=None) -> ChannelSpec:
    """Draw a Rayleigh-faded channel realisation.

    Args:
        preset: One of the named presets, or ``custom`` together with ``support``.
        rng: Generator consumed for the gains.
        support: Iterable of (delay, Doppler) pairs; required for ``custom``.
    """
    preset = ChannelPreset.parse(preset)
    if preset is ChannelPreset.IDENTITY:
        return ChannelSpec.identity()
    if preset is ChannelPreset.CUSTOM:
        if not support:
            raise InvalidArgumentError("custom preset requires an explicit support set")
        support = tuple((int(l), int(a)) for l, a in support)
    else:
        support = preset_support(preset)
    gains = draw_gains(len(support), rng)
    taps = tuple(PathTap(l, a, complex(g)) for (l, a), g in zip(support, gains))
    return ChannelSpec(taps, preset)


def _wrap_phase(prefix_c1: float, size: int, m: np.ndarray) -> np.ndarray:
    """Chirp-periodic factor of the prefix sample at position ``-m``."""
    frac = np.mod(np.longdouble(prefix_c1) * (np.longdouble(size) ** 2 - 2 * size * m.astype(np.longdouble)), 1)
    return np.exp(2j * np.pi * frac.astype(np.float64))


def path_matrices(
    delays, dopplers, N: int, *, size: int | None = None, prefix_c1: float = 0.0, start: int = 0
) -> np.ndarray:
    """Per-path block matrices ``D(a_p) Gamma_p Pi^{l_p}``, shape ``(P, size, size)``.

    ``size`` is the block length (defaults to ``N``), ``N`` sets the Doppler
    unit and ``start`` is the phase index of the first useful sample.
    """
    size = N if size is None else size
    delays = np.asarray(delays, dtype=np.intp)
    dopplers = np.asarray(dopplers, dtype=np.intp)
    if delays.size and delays.max() >= size:
        raise InvalidArgumentError(f"delay {delays.max()} must be smaller than the block length {size}")
    n = np.arange(size)
    out = np.zeros((delays.size, size, size), dtype=np.complex128)
    for p, (l, a) in enumerate(zip(delays, dopplers)):
        col = (n - l) % size
        phase = np.exp(2j * np.pi * np.mod(a * (n + start), N) / N)
        if prefix_c1 and l:
            wrapped = n < l
            phase = phase.copy()
            phase[wrapped] *= _wrap_phase(prefix_c1, size, l - n[wrapped])
        out[p, n, col] = phase
    return out


def channel_matrix(spec: ChannelSpec, N: int, *, size: int | None = None, prefix_c1: float = 0.0,
                   start: int = 0) -> np.ndarray:
    """Block channel matrix seen after prefix removal."""
    if N < 1:
        raise InvalidArgumentError("N must be positive")
    basis = path_matrices(spec.delays, spec.dopplers, N, size=size, prefix_c1=prefix_c1, start=start)
    return np.einsum("p,pij->ij", spec.gains, basis)


def phase_index(sig_len: int, block_starts, block_len: int, prefix_len: int, continuous: bool) -> np.ndarray:
    """Doppler phase index for every sample of a frame."""
    t = np.arange(sig_len)
    if continuous:
        return t
    starts = np.asarray(block_starts)
    which = np.clip(np.searchsorted(starts - prefix_len, t, side="right") - 1, 0, len(starts) - 1)
    return t - starts[which]


def apply_taps(samples: np.ndarray, gains: np.ndarray, delays, dopplers, N: int, phase_idx: np.ndarray) -> np.ndarray:
    """Apply paths to ``samples`` (``(..., T)``) with ``gains`` (``(..., P)``)."""
    out = np.zeros_like(samples, dtype=np.complex128)
    T = samples.shape[-1]
    for p, (l, a) in enumerate(zip(delays, dopplers)):
        phase = np.exp(2j * np.pi * np.mod(a * phase_idx, N) / N)
        contrib = np.zeros_like(out)
        contrib[..., l:] = samples[..., : T - l]
        out += gains[..., p, None] * phase * contrib
    return out


def awgn(shape: tuple[int, ...], variance: float, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(variance / 2.0)


def apply_channel(spec: ChannelSpec, sig: TimeSignal, noise: NoiseSpec, rng: np.random.Generator | None = None, *,
                  continuous_phase: bool = False) -> TimeSignal:
    """Pass a prefixed frame through the channel and add AWGN.

    Raises:
        InvalidArgumentError: the prefix is shorter than the longest delay.
    """
    if sig.prefix_len < spec.max_delay:
        raise InvalidArgumentError(
            f"prefix length {sig.prefix_len} is shorter than the maximum delay {spec.max_delay}"
        )
    idx = phase_index(len(sig), sig.block_starts, sig.block_len, sig.prefix_len, continuous_phase)
    out = apply_taps(sig.samples, spec.gains, spec.delays, spec.dopplers, sig.subcarriers, idx)
    if not noise.noiseless:
        if rng is None:
            raise InvalidArgumentError("a noisy channel needs an rng")
        out = out + awgn(out.shape, noise.variance, rng)
    return TimeSignal(out, sig.prefix_len, sig.block_len, sig.block_starts, sig.subcarriers, sig.prefix_c1,
                      sig.sample_rate, dict(sig.meta))
