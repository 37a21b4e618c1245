"""Bit-to-sample chains for OFDM, OCDM, AFDM and OTFS.

A frame is an ``N x M`` symbol grid: ``N`` subcarriers/chirps/delay bins per
symbol (rows) and ``M`` symbols/Doppler bins per frame (columns). The array
functions (:func:`modulate_array`, :func:`demodulate_array`) accept any number
of leading batch dimensions; the dataclass wrappers work on one frame.

Prefixes:

* OFDM and OTFS use a cyclic prefix.
* OCDM and AFDM use a chirp-periodic prefix. For the chirp convention of
  :mod:`isac_lab.numerics` the prefix sample at position ``-m`` is
  ``s[N - m] * exp(+j 2 pi c1 (N^2 - 2 N m))``. With ``2 N c1`` an integer
  and ``N`` even the factor is 1 and the prefix degenerates to a cyclic one.

16-QAM Gray table (per real dimension, first bit of the pair is the MSB)::

    bits  00  01  11  10
    level -3  -1  +1  +3

The in-phase level comes from bits 0-1 of each quadruple and the quadrature
level from bits 2-3, scaled by ``1/sqrt(10)``; ``0000`` maps to
``(-3 - 3j)/sqrt(10)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .exceptions import InvalidArgumentError
from .numerics import ChirpParams

QAM16_SCALE = 1.0 / np.sqrt(10.0)
# Gray pair (b0, b1) -> amplitude level.
_LEVELS = {(0, 0): -3, (0, 1): -1, (1, 1): 1, (1, 0): 3}
_LEVEL_OF_PAIR = np.array([-3.0, -1.0, 3.0, 1.0])  # indexed by 2*b0 + b1
_PAIR_OF_LEVEL = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)  # levels -3,-1,1,3


class WaveformKind(str, enum.Enum):
    OFDM = "OFDM"
    OCDM = "OCDM"
    AFDM = "AFDM"
    OTFS = "OTFS"

    @classmethod
    def parse(cls, name: str | WaveformKind) -> WaveformKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise InvalidArgumentError(f"unknown waveform {name!r}") from None


class Domain(str, enum.Enum):
    FREQUENCY = "frequency"
    CHIRP = "chirp"
    DELAY_DOPPLER = "delay-Doppler"


_DOMAIN_OF = {
    WaveformKind.OFDM: Domain.FREQUENCY,
    WaveformKind.OCDM: Domain.CHIRP,
    WaveformKind.AFDM: Domain.CHIRP,
    WaveformKind.OTFS: Domain.DELAY_DOPPLER,
}


@dataclass(frozen=True)
class WaveformConfig:
    """Frame layout of one waveform.

    ``chirp`` is required for AFDM; for OCDM it defaults to (and must equal)
    ``c1 = c2 = 1/(2N)``; it is ignored for OFDM and OTFS.
    ``otfs_frame_prefix`` puts a single prefix in front of the whole OTFS frame
    instead of one per symbol.
    """

    kind: WaveformKind
    N: int
    M: int
    prefix_len: int = 0
    chirp: ChirpParams | None = None
    constellation: str = "QAM16"
    otfs_frame_prefix: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveformKind.parse(self.kind))
        if self.N < 2 or self.M < 1:
            raise InvalidArgumentError(f"need N >= 2 and M >= 1, got N={self.N}, M={self.M}")
        if not 0 <= self.prefix_len < self.N:
            raise InvalidArgumentError(f"prefix_len must satisfy 0 <= prefix_len < N, got {self.prefix_len}")
        if self.constellation != "QAM16":
            raise InvalidArgumentError(f"unsupported constellation {self.constellation!r}")
        if self.kind is WaveformKind.OCDM:
            fresnel = ChirpParams.fresnel(self.N)
            if self.chirp is None:
                object.__setattr__(self, "chirp", fresnel)
            elif self.chirp != fresnel:
                raise InvalidArgumentError("OCDM requires c1 = c2 = 1/(2N)")
        elif self.kind is WaveformKind.AFDM:
            if self.chirp is None:
                raise InvalidArgumentError("AFDM needs explicit chirp parameters")
            if self.chirp.N != self.N:
                raise InvalidArgumentError("chirp.N must equal N")

    @property
    def bits_per_frame(self) -> int:
        return 4 * self.N * self.M

    @property
    def frame_len(self) -> int:
        if self.kind is WaveformKind.OTFS and self.otfs_frame_prefix:
            return self.N * self.M + self.prefix_len
        return self.M * (self.N + self.prefix_len)

    @property
    def block_len(self) -> int:
        """Length of the useful part the channel acts on circularly."""
        if self.kind is WaveformKind.OTFS and self.otfs_frame_prefix:
            return self.N * self.M
        return self.N

    @property
    def n_blocks(self) -> int:
        return len(self.block_starts)

    @property
    def block_starts(self) -> tuple[int, ...]:
        """Sample index of the first useful sample of every block."""
        if self.kind is WaveformKind.OTFS and self.otfs_frame_prefix:
            return (self.prefix_len,)
        step = self.N + self.prefix_len
        return tuple(m * step + self.prefix_len for m in range(self.M))

    @property
    def prefix_c1(self) -> float:
        """Chirp rate of the prefix: 0 for cyclic, c1 for chirp-periodic."""
        if self.kind in (WaveformKind.OCDM, WaveformKind.AFDM):
            return self.chirp.c1
        return 0.0


@dataclass
class SymbolGrid:
    values: np.ndarray
    domain: Domain = Domain.FREQUENCY

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim != 2:
            raise InvalidArgumentError(f"symbol grid must be 2-D, got shape {self.values.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class TimeSignal:
    """Complex baseband samples of one frame.

    ``block_starts`` lists the first useful sample after every prefix;
    ``subcarriers`` is the N that sets the Doppler unit (one cycle per N samples).
    """

    samples: np.ndarray
    prefix_len: int = 0
    block_len: int = 0
    block_starts: tuple[int, ...] = ()
    subcarriers: int = 0
    prefix_c1: float = 0.0
    sample_rate: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if not self.block_len:
            self.block_len = self.samples.shape[-1] - self.prefix_len
        if not self.block_starts:
            self.block_starts = (self.prefix_len,)
        if not self.subcarriers:
            self.subcarriers = self.block_len

    def __len__(self) -> int:
        return self.samples.shape[-1]

    @property
    def frame_boundaries(self) -> tuple[int, ...]:
        """Start index of every block including its prefix."""
        return tuple(s - self.prefix_len for s in self.block_starts)


def qam16_map(bits) -> np.ndarray:
    """Map bits (last axis, length divisible by 4) to unit-energy 16-QAM symbols."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 4:
        raise InvalidArgumentError(f"bit count {bits.shape[-1]} is not divisible by 4")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise InvalidArgumentError("bits must be 0 or 1")
    q = bits.reshape(bits.shape[:-1] + (-1, 4)).astype(np.intp)
    i_level = _LEVEL_OF_PAIR[2 * q[..., 0] + q[..., 1]]
    q_level = _LEVEL_OF_PAIR[2 * q[..., 2] + q[..., 3]]
    return (i_level + 1j * q_level) * QAM16_SCALE


def _level_index(x: np.ndarray) -> np.ndarray:
    # Decision boundaries at -2, 0, 2 on the unscaled grid.
    return np.digitize(x / QAM16_SCALE, (-2.0, 0.0, 2.0))


def qam16_demap(symbols) -> np.ndarray:
    """Hard-decision nearest-neighbour demapping; inverse of :func:`qam16_map`."""
    symbols = np.asarray(symbols)
    i_bits = _PAIR_OF_LEVEL[_level_index(symbols.real)]
    q_bits = _PAIR_OF_LEVEL[_level_index(symbols.imag)]
    out = np.concatenate([i_bits, q_bits], axis=-1)
    return out.reshape(symbols.shape[:-1] + (-1,))


def qam16_table() -> dict[tuple[int, int, int, int], complex]:
    """The full 16-entry Gray table, keyed by bit quadruple."""
    table = {}
    for (b0, b1), li in _LEVELS.items():
        for (b2, b3), lq in _LEVELS.items():
            table[(b0, b1, b2, b3)] = complex(li, lq) * QAM16_SCALE
    return table


def _prefix_phase(c1: float, N: int, L: int) -> np.ndarray:
    """Chirp-periodic prefix factors for positions -L..-1 (in that order)."""
    m = np.arange(L, 0, -1, dtype=np.longdouble)
    frac = np.mod(np.longdouble(c1) * (np.longdouble(N) ** 2 - 2 * N * m), 1)
    return np.exp(2j * np.pi * frac.astype(np.float64))


def _add_prefix(blocks: np.ndarray, L: int, c1: float) -> np.ndarray:
    """``blocks`` is ``(..., n_blocks, block_len)``; prefix each block."""
    if L == 0:
        return blocks
    n = blocks.shape[-1]
    prefix = blocks[..., n - L:]
    if c1:
        prefix = prefix * _prefix_phase(c1, n, L)
    return np.concatenate([prefix, blocks], axis=-1)


def _check_grid(cfg: WaveformConfig, X: np.ndarray):
    if X.shape[-2:] != (cfg.N, cfg.M):
        raise InvalidArgumentError(f"grid shape {X.shape[-2:]} does not match (N, M) = ({cfg.N}, {cfg.M})")


def block_samples(cfg: WaveformConfig, X) -> np.ndarray:
    """Useful (prefix-free) time samples, shape ``(..., N, M)`` column per symbol."""
    X = np.asarray(X, dtype=np.complex128)
    _check_grid(cfg, X)
    kind = cfg.kind
    if kind is WaveformKind.OFDM:
        return numerics.idft(X, axis=-2)
    if kind in (WaveformKind.OCDM, WaveformKind.AFDM):
        return numerics.idaft(X, cfg.chirp, axis=-2)
    # OTFS: ISFFT, then rectangular-pulse Heisenberg transform (per-column IDFT).
    return numerics.idft(numerics.isfft(X), axis=-2)


def modulate_array(cfg: WaveformConfig, X) -> np.ndarray:
    """Symbol grids ``(..., N, M)`` to prefixed frames ``(..., frame_len)``."""
    cols = block_samples(cfg, X)
    lead = cols.shape[:-2]
    series = np.swapaxes(cols, -1, -2)  # (..., M, N)
    if cfg.kind is WaveformKind.OTFS and cfg.otfs_frame_prefix:
        series = series.reshape(lead + (1, cfg.N * cfg.M))
    framed = _add_prefix(series, cfg.prefix_len, cfg.prefix_c1)
    return framed.reshape(lead + (-1,))


def strip_prefix(cfg: WaveformConfig, samples) -> np.ndarray:
    """Prefixed frames ``(..., frame_len)`` to useful samples ``(..., N, M)``."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape[-1] != cfg.frame_len:
        raise InvalidArgumentError(f"signal length {samples.shape[-1]} != frame length {cfg.frame_len}")
    lead = samples.shape[:-1]
    blocks = samples.reshape(lead + (cfg.n_blocks, cfg.block_len + cfg.prefix_len))[..., cfg.prefix_len:]
    return np.swapaxes(blocks.reshape(lead + (cfg.M, cfg.N)), -1, -2)


def receive_blocks(cfg: WaveformConfig, cols) -> np.ndarray:
    """Forward transform chain on useful samples ``(..., N, M)``."""
    cols = np.asarray(cols, dtype=np.complex128)
    kind = cfg.kind
    if kind is WaveformKind.OFDM:
        return numerics.dft(cols, axis=-2)
    if kind in (WaveformKind.OCDM, WaveformKind.AFDM):
        return numerics.daft(cols, cfg.chirp, axis=-2)
    return numerics.sfft(numerics.dft(cols, axis=-2))


def demodulate_array(cfg: WaveformConfig, samples) -> np.ndarray:
    return receive_blocks(cfg, strip_prefix(cfg, samples))


def modulate(cfg: WaveformConfig, grid: SymbolGrid | np.ndarray) -> TimeSignal:
    """Modulate one symbol grid into a prefixed time-domain frame."""
    values = grid.values if isinstance(grid, SymbolGrid) else np.asarray(grid)
    if values.ndim != 2:
        raise InvalidArgumentError("modulate expects a single N x M grid")
    return TimeSignal(
        samples=modulate_array(cfg, values),
        prefix_len=cfg.prefix_len,
        block_len=cfg.block_len,
        block_starts=cfg.block_starts,
        subcarriers=cfg.N,
        prefix_c1=cfg.prefix_c1,
    )


def demodulate(cfg: WaveformConfig, sig: TimeSignal | np.ndarray) -> SymbolGrid:
    """Remove prefixes and apply the receive transform chain."""
    samples = sig.samples if isinstance(sig, TimeSignal) else np.asarray(sig)
    if samples.ndim != 1:
        raise InvalidArgumentError("demodulate expects a single frame")
    return SymbolGrid(demodulate_array(cfg, samples), domain=_DOMAIN_OF[cfg.kind])


def receive_matrix(cfg: WaveformConfig) -> np.ndarray:
    """Dense receive transform of one equalisation block.

    ``N x N`` for OFDM/OCDM/AFDM. For OTFS the whole frame is one block: the
    ``NM x NM`` matrix maps the column-major vectorised useful samples to the
    column-major vectorised delay-Doppler grid.
    """
    N, M = cfg.N, cfg.M
    if cfg.kind is WaveformKind.OFDM:
        return numerics.transform_matrix(numerics.dft, N)
    if cfg.kind is not WaveformKind.OTFS:
        return numerics.transform_matrix(lambda x, axis: numerics.daft(x, cfg.chirp, axis=axis), N)
    basis = np.eye(N * M, dtype=np.complex128)  # column j -> vec index j
    cols = basis.T.reshape(N * M, M, N).swapaxes(-1, -2)  # (NM, N, M) column-major unvec
    out = receive_blocks(cfg, cols)  # (NM, N, M)
    return out.swapaxes(-1, -2).reshape(N * M, N * M).T
