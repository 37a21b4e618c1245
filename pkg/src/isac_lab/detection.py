"""Effective channels, linear MMSE equalisation and per-frame BER trials.

Two conventions are flags, shared by :func:`run_trial` and :class:`BatchLink`:

* ``redraw``: ``"frame"`` (default) keeps one channel realisation for the M
  blocks of a frame; ``"block"`` draws a fresh one per block (OFDM, OCDM and
  AFDM only). Block 0 uses the same draw in both modes.
* ``equalization``: ``"block"`` (default) solves one N x N MMSE problem per
  block; ``"frame"`` solves the block-diagonal NM x NM problem jointly. OTFS is
  always equalised over the whole frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .exceptions import InvalidArgumentError
from .numerics import hermitian_solve
from .waveform import (
    SymbolGrid,
    WaveformConfig,
    WaveformKind,
    demodulate,
    demodulate_array,
    modulate,
    modulate_array,
    qam16_demap,
    qam16_map,
    receive_matrix,
)


@dataclass(frozen=True)
class EffectiveChannel:
    matrix: np.ndarray
    noise_var: float = 0.0

    def __post_init__(self):
        if self.noise_var < 0:
            raise InvalidArgumentError("noise_var must be >= 0")
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidArgumentError("effective channel has non-finite entries")


@dataclass(frozen=True)
class TrialResult:
    bit_errors: int
    bits_total: int

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_total:
            raise InvalidArgumentError(f"bit_errors {self.bit_errors} outside [0, {self.bits_total}]")

    def __add__(self, other: TrialResult) -> TrialResult:
        return TrialResult(self.bit_errors + other.bit_errors, self.bits_total + other.bits_total)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else 0.0


def _frame_dim(cfg: WaveformConfig) -> int:
    return cfg.N * cfg.M if cfg.kind is WaveformKind.OTFS else cfg.N


def effective_channel(cfg: WaveformConfig, H_time, noise_var: float = 0.0) -> EffectiveChannel:
    """Conjugate a time-domain block matrix into the waveform's symbol domain.

    For OTFS an ``N x N`` ``H_time`` is taken to act identically on each of
    the ``M`` symbols; an ``NM x NM`` matrix is used as the whole-frame map.
    """
    H_time = np.asarray(H_time, dtype=np.complex128)
    N, M = cfg.N, cfg.M
    if cfg.kind is WaveformKind.OTFS and H_time.shape == (N, N) and cfg.otfs_frame_prefix is False:
        H_time = np.kron(np.eye(M), H_time)
    dim = _frame_dim(cfg)
    if H_time.shape != (dim, dim):
        raise InvalidArgumentError(f"H_time has shape {H_time.shape}, expected ({dim}, {dim})")
    A = receive_matrix(cfg)
    return EffectiveChannel(A @ H_time @ A.conj().T, noise_var)


def mmse_equalize(h: EffectiveChannel, y) -> np.ndarray:
    """Linear MMSE estimate ``(H^H H + s2 I)^-1 H^H y``.

    ``y`` may be a vector or a matrix of column vectors. With ``noise_var = 0``
    this is zero forcing and fails with :class:`NumericError` if ``H`` is singular.
    """
    H = h.matrix
    y = np.asarray(y, dtype=np.complex128)
    Hh = np.swapaxes(H.conj(), -1, -2)
    gram = Hh @ H + h.noise_var * np.eye(H.shape[-1])
    if y.ndim == H.ndim - 1:
        return hermitian_solve(gram, (Hh @ y[..., None])[..., 0])
    return hermitian_solve(gram, Hh @ y)


def bits_to_grid(cfg: WaveformConfig, bits) -> np.ndarray:
    """Map bits to the ``(..., N, M)`` symbol grid, filling column by column."""
    symbols = qam16_map(bits)
    lead = symbols.shape[:-1]
    return np.swapaxes(symbols.reshape(lead + (cfg.M, cfg.N)), -1, -2)


def grid_to_bits(grid) -> np.ndarray:
    grid = np.asarray(grid)
    flat = np.swapaxes(grid, -1, -2).reshape(grid.shape[:-2] + (-1,))
    return qam16_demap(flat)


def draw_frame(cfg: WaveformConfig, preset, rng: np.random.Generator, support=None):
    """Random bits and a channel realisation, drawn in that order."""
    bits = rng.integers(0, 2, size=cfg.bits_per_frame, dtype=np.uint8)
    spec = ch.draw_channel(preset, rng, support=support)
    return bits, spec


def time_matrices(cfg: WaveformConfig, spec: ch.ChannelSpec, continuous_phase: bool = False) -> list[np.ndarray]:
    """Time-domain matrix of every equalisation block of a frame."""
    if cfg.kind is WaveformKind.OTFS:
        if cfg.otfs_frame_prefix:
            start = cfg.block_starts[0] if continuous_phase else 0
            return [ch.channel_matrix(spec, cfg.N, size=cfg.N * cfg.M, start=start)]
        blocks = [
            ch.channel_matrix(spec, cfg.N, start=s if continuous_phase else 0) for s in cfg.block_starts
        ]
        frame = np.zeros((cfg.N * cfg.M,) * 2, dtype=np.complex128)
        for m, block in enumerate(blocks):
            frame[m * cfg.N:(m + 1) * cfg.N, m * cfg.N:(m + 1) * cfg.N] = block
        return [frame]
    return [
        ch.channel_matrix(spec, cfg.N, prefix_c1=cfg.prefix_c1, start=s if continuous_phase else 0)
        for s in cfg.block_starts
    ]


REDRAW_MODES = ("frame", "block")
EQUALIZATION_MODES = ("block", "frame")


def _check_modes(cfgs, redraw: str, equalization: str) -> None:
    if redraw not in REDRAW_MODES:
        raise InvalidArgumentError(f"redraw must be one of {REDRAW_MODES}, got {redraw!r}")
    if equalization not in EQUALIZATION_MODES:
        raise InvalidArgumentError(f"equalization must be one of {EQUALIZATION_MODES}, got {equalization!r}")
    if redraw == "block" and any(c.kind is WaveformKind.OTFS for c in cfgs):
        raise InvalidArgumentError("per-block channel redraw is not defined for OTFS frames")


def _block_diag(blocks) -> np.ndarray:
    """``(..., M, n, n)`` -> ``(..., M n, M n)``."""
    blocks = np.asarray(blocks)
    m, n = blocks.shape[-3], blocks.shape[-1]
    out = np.zeros(blocks.shape[:-3] + (m * n, m * n), dtype=blocks.dtype)
    for i in range(m):
        out[..., i * n:(i + 1) * n, i * n:(i + 1) * n] = blocks[..., i, :, :]
    return out


def _noise_spec(snr_db) -> ch.NoiseSpec:
    if isinstance(snr_db, ch.NoiseSpec):
        return snr_db
    return ch.NoiseSpec.none() if snr_db is None else ch.NoiseSpec(float(snr_db))


def run_trial(cfg: WaveformConfig, preset, snr_db, seed: int, *, continuous_phase: bool = False,
              support=None, redraw: str = "frame", equalization: str = "block") -> TrialResult:
    """One frame of the uncoded link with perfect channel knowledge.

    ``snr_db=None`` disables noise. The frame is a pure function of its
    arguments: bits, channel gains and noise all come from ``seed``.
    """
    _check_modes([cfg], redraw, equalization)
    noise = _noise_spec(snr_db)
    rng = np.random.default_rng(seed)
    bits, spec = draw_frame(cfg, preset, rng, support)
    specs = [spec]
    if redraw == "block":
        specs += [ch.draw_channel(preset, rng, support=support) for _ in range(cfg.M - 1)]
    max_delay = max(s.max_delay for s in specs)
    if max_delay > cfg.prefix_len:
        raise InvalidArgumentError(f"prefix {cfg.prefix_len} shorter than channel delay {max_delay}")
    tx = modulate(cfg, SymbolGrid(bits_to_grid(cfg, bits)))
    if len(specs) == 1:
        rx = ch.apply_channel(spec, tx, noise, rng, continuous_phase=continuous_phase).samples
        mats = time_matrices(cfg, spec, continuous_phase)
    else:
        # Samples kept by block m only ever see channel m, so splice per block.
        rx = np.empty(len(tx), dtype=np.complex128)
        mats = []
        for m, (s, start) in enumerate(zip(specs, cfg.block_starts)):
            seg = slice(start - cfg.prefix_len, start + cfg.N)
            rx[seg] = ch.apply_channel(s, tx, ch.NoiseSpec.none(), continuous_phase=continuous_phase).samples[seg]
            mats.append(time_matrices(cfg, s, continuous_phase)[m])
        if not noise.noiseless:
            rx = rx + ch.awgn(rx.shape, noise.variance, rng)
    Y = demodulate(cfg, rx).values
    if cfg.kind is WaveformKind.OTFS or equalization == "frame":
        if cfg.kind is WaveformKind.OTFS:
            h = effective_channel(cfg, mats[0], noise.variance)
        else:
            h = EffectiveChannel(_block_diag([effective_channel(cfg, H).matrix for H in mats]), noise.variance)
        x_hat = mmse_equalize(h, Y.T.reshape(-1)).reshape(cfg.M, cfg.N).T
    else:
        x_hat = np.empty_like(Y)
        for m, H in enumerate(mats):
            x_hat[:, m] = mmse_equalize(effective_channel(cfg, H, noise.variance), Y[:, m])
    errors = int(np.count_nonzero(grid_to_bits(x_hat) != bits))
    return TrialResult(errors, cfg.bits_per_frame)


class BatchLink:
    """Vectorised equivalent of :func:`run_trial` for many frames of one preset.

    Per-path symbol-domain matrices are precomputed once per waveform, so each
    frame costs one weighted sum, one Gram matrix and one solve per block.
    """

    def __init__(self, cfgs, preset, *, continuous_phase: bool = False, support=None,
                 redraw: str = "frame", equalization: str = "block"):
        self.cfgs = list(cfgs)
        if not self.cfgs:
            raise InvalidArgumentError("need at least one waveform")
        _check_modes(self.cfgs, redraw, equalization)
        self.redraw = redraw
        self.equalization = equalization
        base = self.cfgs[0]
        if any((c.N, c.M) != (base.N, base.M) for c in self.cfgs):
            raise InvalidArgumentError("all waveforms of a batch must share N and M")
        self.preset = ch.ChannelPreset.parse(preset)
        self.support = support
        self.continuous_phase = continuous_phase
        if self.preset is ch.ChannelPreset.CUSTOM:
            tmpl = tuple((int(l), int(a)) for l, a in support)
        else:
            tmpl = ch.preset_support(self.preset)
        self.delays = np.array([l for l, _ in tmpl], dtype=np.intp)
        self.dopplers = np.array([a for _, a in tmpl], dtype=np.intp)
        for c in self.cfgs:
            if self.delays.max() > c.prefix_len:
                raise InvalidArgumentError(f"prefix {c.prefix_len} shorter than channel delay {self.delays.max()}")
        self._bases = [self._symbol_bases(c) for c in self.cfgs]
        self._phase_idx = [
            ch.phase_index(c.frame_len, c.block_starts, c.block_len, c.prefix_len, continuous_phase)
            for c in self.cfgs
        ]

    def _symbol_bases(self, cfg: WaveformConfig) -> np.ndarray:
        # (P, dim, dim); block-phase offsets are folded into the gains later.
        unit = [ch.ChannelSpec((ch.PathTap(int(l), int(a), 1.0),)) for l, a in zip(self.delays, self.dopplers)]
        out = []
        for spec in unit:
            H = time_matrices(cfg, spec, continuous_phase=False)[0]
            out.append(effective_channel(cfg, H).matrix)
        return np.stack(out)

    def _block_gains(self, cfg: WaveformConfig, gains: np.ndarray) -> np.ndarray:
        """Gains per equalisation block, ``(B, n_eq, P)``, from draws ``(B, n_draw, P)``."""
        if not self.continuous_phase or cfg.kind is WaveformKind.OTFS:
            return gains
        starts = np.asarray(cfg.block_starts)
        rot = np.exp(2j * np.pi * np.mod(np.outer(starts, self.dopplers), cfg.N) / cfg.N)
        return gains * rot[None]

    def _apply(self, cfg: WaveformConfig, tx: np.ndarray, gains: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if gains.shape[1] == 1:
            return ch.apply_taps(tx, gains[:, 0], self.delays, self.dopplers, cfg.N, idx)
        rx = np.empty_like(tx)
        for m, start in enumerate(cfg.block_starts):
            seg = slice(start - cfg.prefix_len, start + cfg.N)
            rx[:, seg] = ch.apply_taps(tx, gains[:, m], self.delays, self.dopplers, cfg.N, idx)[:, seg]
        return rx

    def run(self, snr_db, seeds) -> np.ndarray:
        """Bit errors per (waveform, frame), shape ``(n_cfg, len(seeds))``."""
        if self.continuous_phase and any(c.kind is WaveformKind.OTFS for c in self.cfgs):
            raise InvalidArgumentError("continuous-phase OTFS frames are only supported by run_trial")
        noise = _noise_spec(snr_db)
        base = self.cfgs[0]
        max_len = max(c.frame_len for c in self.cfgs)
        B = len(seeds)
        bits = np.empty((B, base.bits_per_frame), dtype=np.uint8)
        n_draw = base.M if self.redraw == "block" else 1
        gains = np.empty((B, n_draw, self.delays.size), dtype=np.complex128)
        z = np.zeros((B, max_len), dtype=np.complex128)
        for i, seed in enumerate(seeds):
            rng = np.random.default_rng(seed)
            b, spec = draw_frame(base, self.preset, rng, self.support)
            bits[i] = b
            gains[i, 0] = spec.gains
            for m in range(1, n_draw):
                gains[i, m] = ch.draw_channel(self.preset, rng, support=self.support).gains
            if not noise.noiseless:
                z[i] = ch.awgn((max_len,), noise.variance, rng)
        X = bits_to_grid(base, bits)
        errors = np.empty((len(self.cfgs), B), dtype=np.int64)
        for k, cfg in enumerate(self.cfgs):
            tx = modulate_array(cfg, X)
            rx = self._apply(cfg, tx, gains, self._phase_idx[k])
            rx += z[:, : cfg.frame_len]
            Y = demodulate_array(cfg, rx)
            g = self._block_gains(cfg, gains)
            P, dim = self._bases[k].shape[:2]
            H = (g.reshape(-1, P) @ self._bases[k].reshape(P, -1)).reshape(g.shape[:2] + (dim, dim))
            joint = cfg.kind is WaveformKind.OTFS or self.equalization == "frame"
            if joint and cfg.kind is not WaveformKind.OTFS:
                H = _block_diag(np.broadcast_to(H, (B, cfg.M, dim, dim)))[:, None]
            if joint:
                y = np.swapaxes(Y, -1, -2).reshape(B, 1, -1, 1)
            elif H.shape[1] == 1:
                y = Y[:, None]
            else:
                y = np.swapaxes(Y, -1, -2)[..., None]
            Hh = np.swapaxes(H.conj(), -1, -2)
            gram = Hh @ H + noise.variance * np.eye(H.shape[-1])
            x_hat = hermitian_solve(gram, Hh @ y)
            if joint:
                x_hat = np.swapaxes(x_hat.reshape(B, cfg.M, cfg.N), -1, -2)
            elif H.shape[1] == 1:
                x_hat = x_hat[:, 0]
            else:
                x_hat = np.swapaxes(x_hat[..., 0], -1, -2)
            errors[k] = np.count_nonzero(grid_to_bits(x_hat) != bits, axis=-1)
        return errors
