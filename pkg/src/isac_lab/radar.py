"""Sensing chains: FMCW dechirp processing, OFDM radar, stepped carriers, PAPR.

Conventions
-----------
* Baseband FMCW chirp ``exp(j pi alpha t^2)``, ``0 <= t < T``; the carrier
  ``f_c`` enters only through the echo phase ``exp(-j 2 pi f_c tau)``.
* Dechirp is ``tx * conj(rx)``: a target at range ``R`` gives a beat tone at
  ``+2 R alpha / c`` and positive radial velocity (range increasing) shows up
  as a positive Doppler ``2 v f_c / c`` across chirps.
* Targets are stop-and-hop: delay fixed over the frame, Doppler phase constant
  within a chirp and advancing from chirp to chirp.
* ``SPEED_OF_LIGHT`` is the rounded 3e8 m/s, so 1 GHz of bandwidth resolves
  exactly 0.15 m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError
from .waveform import TimeSignal

SPEED_OF_LIGHT = 3.0e8


def _window(kind: str, n: int) -> np.ndarray:
    if kind in ("rect", "rectangular", None):
        return np.ones(n)
    if kind == "hann":
        return np.hanning(n)
    raise InvalidArgumentError(f"unknown window {kind!r}")


@dataclass(frozen=True)
class FmcwConfig:
    """FMCW frame parameters (SI units).

    ``fs`` is the rate at which the beat signal is sampled; the chirp itself
    is generated at ``fs * oversample``.
    """

    f_c: float
    B: float
    T: float
    fs: float
    n_chirps: int = 1
    t_idle: float = 0.0

    def __post_init__(self):
        if self.B <= 0 or self.T <= 0 or self.fs <= 0 or self.f_c < 0:
            raise InvalidArgumentError("B, T and fs must be positive and f_c non-negative")
        if self.n_chirps < 1 or self.t_idle < 0:
            raise InvalidArgumentError("need n_chirps >= 1 and t_idle >= 0")

    @property
    def alpha(self) -> float:
        return self.B / self.T

    @property
    def n_samples(self) -> int:
        return int(round(self.fs * self.T))

    @property
    def chirp_interval(self) -> float:
        return self.T + self.t_idle

    @property
    def range_bin_m(self) -> float:
        # Beat-frequency bin fs/Ns mapped to range; equals c/(2B) when Ns = fs*T.
        return SPEED_OF_LIGHT / (2.0 * self.B) * (self.fs * self.T / self.n_samples)

    @property
    def velocity_bin_mps(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.f_c * self.n_chirps * self.chirp_interval)

    @property
    def max_range_m(self) -> float:
        return self.n_samples * self.range_bin_m

    @property
    def max_velocity_mps(self) -> float:
        return SPEED_OF_LIGHT / (4.0 * self.f_c * self.chirp_interval)

    @classmethod
    def from_dict(cls, doc: dict) -> FmcwConfig:
        allowed = {"f_c", "B", "T", "fs", "n_chirps", "t_idle"}
        unknown = set(doc) - allowed
        if unknown:
            raise InvalidArgumentError(f"unknown FMCW config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class Target:
    range: float
    velocity: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.range < 0:
            raise InvalidArgumentError(f"target range must be >= 0, got {self.range}")


@dataclass
class RangeDopplerMap:
    """Magnitude map, rows = velocity bins, columns = range bins.

    Row ``zero_velocity_row`` corresponds to zero velocity; row ``r`` maps to
    ``(r - zero_velocity_row) * velocity_bin_mps``.
    """

    magnitudes: np.ndarray
    range_bin_m: float
    velocity_bin_mps: float
    zero_velocity_row: int = 0

    def __post_init__(self):
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        if self.range_bin_m <= 0 or self.velocity_bin_mps <= 0:
            raise InvalidArgumentError("bin scalings must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitudes.shape

    def peak_bins(self) -> tuple[int, int]:
        """(velocity row, range column) of the maximum."""
        r, c = np.unravel_index(np.argmax(self.magnitudes), self.magnitudes.shape)
        return int(r), int(c)

    def peak(self) -> tuple[float, float]:
        """(range in m, velocity in m/s) of the strongest cell."""
        r, c = self.peak_bins()
        return c * self.range_bin_m, (r - self.zero_velocity_row) * self.velocity_bin_mps


def gen_chirp(cfg: FmcwConfig, oversample: int = 1) -> TimeSignal:
    """One baseband up-chirp sampled at ``fs * oversample``."""
    rate = cfg.fs * oversample
    n = int(round(rate * cfg.T))
    if n < 2:
        raise InvalidArgumentError(f"fs*T gives {n} samples; need at least 2")
    t = np.arange(n) / rate
    return TimeSignal(np.exp(1j * np.pi * cfg.alpha * t**2), sample_rate=rate)


def simulate_echo(
    cfg: FmcwConfig,
    targets,
    rng: np.random.Generator | None = None,
    snr_db: float | None = None,
    oversample: int = 1,
) -> TimeSignal:
    """Received echoes of every chirp in the frame, samples of shape ``(n_chirps, Ns)``.

    ``snr_db`` sets the per-sample noise variance ``10**(-snr_db/10)`` relative
    to a unit-amplitude echo; ``None`` means noiseless.
    """
    rate = cfg.fs * oversample
    n = int(round(rate * cfg.T))
    if n < 2:
        raise InvalidArgumentError(f"fs*T gives {n} samples; need at least 2")
    t = np.arange(n) / rate
    k = np.arange(cfg.n_chirps)[:, None]
    rx = np.zeros((cfg.n_chirps, n), dtype=np.complex128)
    for tgt in targets:
        tau = 2.0 * tgt.range / SPEED_OF_LIGHT
        if tau >= cfg.T:
            raise InvalidArgumentError(f"target at {tgt.range} m is delayed beyond the chirp duration")
        if 2.0 * tgt.range * cfg.alpha / SPEED_OF_LIGHT >= cfg.fs / 2:
            raise InvalidArgumentError(f"target at {tgt.range} m has a beat frequency above fs/2")
        f_d = 2.0 * tgt.velocity * cfg.f_c / SPEED_OF_LIGHT
        carrier = np.exp(-2j * np.pi * (np.mod(cfg.f_c * tau, 1.0) + f_d * k * cfg.chirp_interval))
        rx += tgt.amplitude * carrier * np.exp(1j * np.pi * cfg.alpha * (t - tau) ** 2)[None, :]
    if snr_db is not None:
        if rng is None:
            raise InvalidArgumentError("noisy echoes need an rng")
        z = rng.standard_normal(rx.shape + (2,))
        rx += (z[..., 0] + 1j * z[..., 1]) * np.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    return TimeSignal(rx, sample_rate=rate, meta={"chirp_interval": cfg.chirp_interval})


def dechirp(tx, rx) -> TimeSignal:
    """Mixer output ``tx * conj(rx)``; ``tx`` broadcasts over the chirps of ``rx``."""
    tx_s = tx.samples if isinstance(tx, TimeSignal) else np.asarray(tx)
    rx_s = rx.samples if isinstance(rx, TimeSignal) else np.asarray(rx)
    if tx_s.shape[-1] != rx_s.shape[-1]:
        raise InvalidArgumentError(f"length mismatch: tx {tx_s.shape[-1]} vs rx {rx_s.shape[-1]}")
    rate = rx.sample_rate if isinstance(rx, TimeSignal) else None
    return TimeSignal(tx_s * np.conj(rx_s), sample_rate=rate)


def brickwall_decimate(x, factor: int) -> np.ndarray:
    """Ideal low-pass to ``1/(2 factor)`` of the rate, then keep every ``factor``-th sample."""
    x = np.asarray(x, dtype=np.complex128)
    if factor == 1:
        return x
    n = x.shape[-1]
    spec = np.fft.fft(x, axis=-1)
    f = np.fft.fftfreq(n)
    spec[..., np.abs(f) >= 0.5 / factor] = 0.0
    return np.fft.ifft(spec, axis=-1)[..., ::factor]


def fmcw_beat(cfg: FmcwConfig, targets, rng=None, snr_db=None, oversample: int = 1) -> np.ndarray:
    """Full receive chain up to the ADC: chirp, echo, mix, low-pass, decimate."""
    tx = gen_chirp(cfg, oversample)
    rx = simulate_echo(cfg, targets, rng, snr_db, oversample)
    return brickwall_decimate(dechirp(tx, rx).samples, oversample)


def fmcw_range_doppler(beats, cfg: FmcwConfig, window: str = "rect") -> RangeDopplerMap:
    """2-D DFT of per-chirp beat signals ``(n_chirps, Ns)``; velocities centred on row ``n_chirps // 2``."""
    beats = beats.samples if isinstance(beats, TimeSignal) else beats
    beats = np.atleast_2d(np.asarray(beats, dtype=np.complex128))
    n_chirps, ns = beats.shape
    if n_chirps < 1:
        raise InvalidArgumentError("need at least one chirp")
    w = _window(window, ns)[None, :] * _window(window, n_chirps)[:, None]
    rng_fft = np.fft.fft(beats * w, axis=1, norm="ortho")
    rd = np.fft.fftshift(np.fft.fft(rng_fft, axis=0, norm="ortho"), axes=0)
    range_bin = SPEED_OF_LIGHT / (2.0 * cfg.B) * (cfg.fs * cfg.T / ns)
    vel_bin = SPEED_OF_LIGHT / (2.0 * cfg.f_c * n_chirps * cfg.chirp_interval)
    return RangeDopplerMap(np.abs(rd), range_bin, vel_bin, zero_velocity_row=n_chirps // 2)


@dataclass(frozen=True)
class OfdmRadarConfig:
    """OFDM sensing numerology; ``cp_len`` in samples stretches the symbol duration."""

    n_subcarriers: int
    n_symbols: int
    f_c: float = 28e9
    subcarrier_spacing: float = 120e3
    cp_len: int = 0

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def symbol_duration(self) -> float:
        return (self.n_subcarriers + self.cp_len) / self.bandwidth

    @property
    def range_bin_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def velocity_bin_mps(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.f_c * self.n_symbols * self.symbol_duration)

    @property
    def max_velocity_mps(self) -> float:
        return SPEED_OF_LIGHT / (4.0 * self.f_c * self.symbol_duration)

    @classmethod
    def from_dict(cls, doc: dict) -> OfdmRadarConfig:
        allowed = {"n_subcarriers", "n_symbols", "f_c", "subcarrier_spacing", "cp_len"}
        unknown = set(doc) - allowed
        if unknown:
            raise InvalidArgumentError(f"unknown OFDM radar config keys: {sorted(unknown)}")
        return cls(**doc)


def _grid_values(g) -> np.ndarray:
    return np.asarray(getattr(g, "values", g), dtype=np.complex128)


def ofdm_radar_process(tx_grid, rx_grid, cfg: OfdmRadarConfig | None = None,
                       window: str = "rect") -> RangeDopplerMap:
    """Periodogram from received subcarrier symbols.

    Divides out the transmitted symbols, then takes the inverse DFT across
    subcarriers (delay) and the DFT across symbols (Doppler). Rows of the map
    are Doppler bins ``0..M-1``, columns delay bins ``0..N-1``; without ``cfg``
    both bin scalings are 1.

    Raises:
        InvalidArgumentError: grids differ in shape or a transmitted symbol is zero.
    """
    tx = _grid_values(tx_grid)
    rx = _grid_values(rx_grid)
    if tx.shape != rx.shape or tx.ndim != 2:
        raise InvalidArgumentError(f"grid shapes differ: {tx.shape} vs {rx.shape}")
    if np.any(tx == 0):
        raise InvalidArgumentError("transmitted reference symbols must be nonzero")
    n, m = tx.shape
    quotient = rx / tx
    w = _window(window, n)[:, None] * _window(window, m)[None, :]
    delay = np.fft.ifft(quotient * w, axis=0, norm="ortho")
    rd = np.fft.fft(delay, axis=1, norm="ortho")
    if cfg is None:
        return RangeDopplerMap(np.abs(rd).T, 1.0, 1.0)
    return RangeDopplerMap(np.abs(rd).T, cfg.range_bin_m, cfg.velocity_bin_mps)


def shifted_rx(tx, delay_bins: int, doppler_bins: int) -> np.ndarray:
    """Echo of an on-grid point target: phase ramps across subcarriers and symbols."""
    tx = _grid_values(tx)
    n, m = tx.shape
    k = np.arange(n)[:, None]
    s = np.arange(m)[None, :]
    return tx * np.exp(-2j * np.pi * k * delay_bins / n) * np.exp(2j * np.pi * s * doppler_bins / m)


@dataclass(frozen=True)
class SteppedPlan:
    """Stepped-carrier schedule.

    ``order[i]`` is the sub-band transmitted at step ``i`` (sub-band 0 is the
    lowest frequency). Each step lasts ``sub_symbol_duration`` and carries
    ``n_sub`` subcarriers spanning ``sub_bandwidth``.
    """

    order: tuple[int, ...]
    n_sub: int
    sub_bandwidth: float
    f_c: float = 77e9
    sub_symbol_duration: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(o) for o in self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise InvalidArgumentError(f"step order {self.order} is not a permutation of 0..M-1")
        if self.n_sub < 1 or self.sub_bandwidth <= 0 or self.sub_symbol_duration <= 0:
            raise InvalidArgumentError("n_sub, sub_bandwidth and sub_symbol_duration must be positive")

    @classmethod
    def sequential(cls, M: int, n_sub: int, sub_bandwidth: float, **kw) -> SteppedPlan:
        return cls(tuple(range(M)), n_sub, sub_bandwidth, **kw)

    @property
    def M(self) -> int:
        return len(self.order)

    @property
    def single_band_max_velocity(self) -> float:
        return SPEED_OF_LIGHT / (4.0 * self.f_c * self.sub_symbol_duration)

    @property
    def max_velocity_mps(self) -> float:
        return self.single_band_max_velocity / self.M


@dataclass
class RangeProfile:
    """Range profiles, shape ``(n_range, K)`` for ``K`` repeated measurements."""

    magnitudes: np.ndarray
    range_bin_m: float
    max_velocity_mps: float
    meta: dict = field(default_factory=dict)


def stepped_carrier_combine(sub_profiles, plan: SteppedPlan, oversample: int = 1) -> RangeProfile:
    """Combine sub-band channel estimates into one wideband range profile.

    ``sub_profiles[i]`` is the ``n_sub x K`` quotient ``rx / tx`` measured at
    step ``i``. The sub-spectra are placed in frequency order and an inverse
    DFT over the combined band gives the profile; ``oversample`` zero-pads it.
    """
    subs = [np.atleast_2d(_grid_values(s).T).T for s in sub_profiles]
    if len(subs) != plan.M:
        raise InvalidArgumentError(f"got {len(subs)} sub-grids for a {plan.M}-step plan")
    shape = subs[0].shape
    if any(s.shape != shape for s in subs) or shape[0] != plan.n_sub:
        raise InvalidArgumentError("sub-grids must all be n_sub x K")
    bands = [None] * plan.M
    for step, band in enumerate(plan.order):
        bands[band] = subs[step]
    full = np.concatenate(bands, axis=0)
    n = full.shape[0]
    n_pad = n * oversample
    profile = np.fft.ifft(full, n=n_pad, axis=0) * (n_pad / np.sqrt(n))
    range_bin = SPEED_OF_LIGHT / (2.0 * plan.M * plan.sub_bandwidth) / oversample
    return RangeProfile(np.abs(profile), range_bin, plan.max_velocity_mps, meta={"bandwidth": plan.M * plan.sub_bandwidth})


def stepped_point_target(plan: SteppedPlan, range_m: float, velocity: float = 0.0, K: int = 1) -> list[np.ndarray]:
    """Per-step quotient grids for a point target seen through ``plan``.

    Sub-band ``b`` covers baseband offsets ``(b n_sub + k) df``; step ``i`` of
    repetition ``r`` is transmitted at ``(r M + i) * sub_symbol_duration``.
    """
    df = plan.sub_bandwidth / plan.n_sub
    tau = 2.0 * range_m / SPEED_OF_LIGHT
    f_d = 2.0 * velocity * plan.f_c / SPEED_OF_LIGHT
    k = np.arange(plan.n_sub)[:, None]
    reps = np.arange(K)[None, :]
    out = []
    for step, band in enumerate(plan.order):
        f = (band * plan.n_sub + k) * df
        t = (reps * plan.M + step) * plan.sub_symbol_duration
        out.append(np.exp(-2j * np.pi * f * tau) * np.exp(2j * np.pi * f_d * t))
    return out


def mainlobe_width(profile: np.ndarray) -> int:
    """Null-to-null width (in bins) of the main lobe around the peak of a 1-D profile."""
    p = np.asarray(profile, dtype=np.float64)
    i = int(np.argmax(p))
    n = p.size
    left = i
    while left - 1 >= 0 and p[left - 1] < p[left]:
        left -= 1
    right = i
    while right + 1 < n and p[right + 1] < p[right]:
        right += 1
    return right - left


def papr_db(samples, axis: int = -1) -> np.ndarray:
    """Peak-to-average power ratio in dB along ``axis`` (vectorised)."""
    p = np.abs(np.asarray(samples)) ** 2
    mean = p.mean(axis=axis)
    if np.any(mean == 0):
        raise InvalidArgumentError("PAPR of an all-zero signal is undefined")
    return 10.0 * np.log10(p.max(axis=axis) / mean)


def papr(sig) -> float:
    """PAPR of one signal, ``10 log10(max|s|^2 / mean|s|^2)``."""
    s = sig.samples if isinstance(sig, TimeSignal) else np.asarray(sig)
    s = np.ravel(s)
    if s.size == 0:
        raise InvalidArgumentError("PAPR of an empty signal is undefined")
    return float(papr_db(s))


def ccdf(values, thresholds) -> np.ndarray:
    """Empirical ``P(value > threshold)`` for every threshold."""
    values = np.sort(np.ravel(values))
    thresholds = np.asarray(thresholds, dtype=np.float64)
    return 1.0 - np.searchsorted(values, thresholds, side="right") / values.size
