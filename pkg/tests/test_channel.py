import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac_lab import channel as ch
from isac_lab import waveform as wf
from isac_lab.channel import ChannelPreset, ChannelSpec, NoiseSpec, PathTap
from isac_lab.exceptions import InvalidArgumentError
from isac_lab.numerics import ChirpParams
from isac_lab.waveform import WaveformConfig


def matrix_oracle(taps, N, c1=0.0, start=0):
    """Entry-by-entry H[n, (n - l) mod N] with the prefix wrap factor for n < l."""
    H = np.zeros((N, N), dtype=complex)
    for l, a, h in taps:
        for n in range(N):
            v = h * np.exp(2j * np.pi * a * (n + start) / N)
            if n < l:
                m = l - n
                v *= np.exp(2j * np.pi * c1 * (N * N - 2 * N * m))
            H[n, (n - l) % N] += v
    return H


class TestPresets:
    @pytest.mark.parametrize("preset,count", [("freq-sel", 3), ("time-sel", 7), ("doubly-sel", 21)])
    def test_cardinality(self, preset, count):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert len(ch.draw_channel(preset, rng).taps) == count

    def test_supports(self):
        rng = np.random.default_rng(1)
        fs = ch.draw_channel("freq-sel", rng)
        assert sorted((t.delay, t.doppler) for t in fs.taps) == [(0, 0), (1, 0), (2, 0)]
        ts = ch.draw_channel("time-sel", rng)
        assert sorted((t.delay, t.doppler) for t in ts.taps) == [(0, a) for a in range(-3, 4)]
        ds = ch.draw_channel("doubly-sel", rng)
        assert sorted((t.delay, t.doppler) for t in ds.taps) == [(l, a) for l in range(3) for a in range(-3, 4)]
        assert ds.max_delay == ch.L_MAX == 2 and ds.max_doppler == ch.A_MAX == 3
        assert ds.preset is ChannelPreset.DOUBLY_SEL

    def test_identity_and_custom(self):
        rng = np.random.default_rng(2)
        ident = ch.draw_channel("identity", rng)
        assert ident.taps == (PathTap(0, 0, 1.0),)
        custom = ch.draw_channel("custom", rng, support=[(0, 0), (4, -1)])
        assert [(t.delay, t.doppler) for t in custom.taps] == [(0, 0), (4, -1)]
        with pytest.raises(InvalidArgumentError):
            ch.draw_channel("custom", rng)
        with pytest.raises(InvalidArgumentError):
            ch.draw_channel("flat-ish", rng)

    def test_mean_total_power(self):
        rng = np.random.default_rng(3)
        power = [np.sum(np.abs(ch.draw_channel("freq-sel", rng).gains) ** 2) for _ in range(100_000)]
        assert abs(np.mean(power) - 1) <= 0.02
        g = ch.draw_gains(21, rng, size=(100_000,))
        assert abs(np.mean(np.sum(np.abs(g) ** 2, axis=-1)) - 1) <= 0.02
        # Per-tap variance 1/P and circular symmetry.
        np.testing.assert_allclose(np.mean(np.abs(g) ** 2, axis=0), 1 / 21, rtol=0.03)
        assert abs(np.mean(g ** 2)) < 3e-3

    def test_reproducible(self):
        a = ch.draw_channel("doubly-sel", np.random.default_rng(7))
        b = ch.draw_channel("doubly-sel", np.random.default_rng(7))
        assert a == b


class TestChannelMatrix:
    def test_identity(self):
        np.testing.assert_array_equal(ch.channel_matrix(ChannelSpec.identity(), 6), np.eye(6))

    def test_cyclic_shift(self):
        H = ch.channel_matrix(ChannelSpec((PathTap(1, 0, 1),)), 5)
        expect = np.zeros((5, 5))
        for n in range(5):
            expect[n, (n - 1) % 5] = 1
        np.testing.assert_array_equal(H, expect)
        assert H[0, 4] == 1 and all(H[n, n - 1] == 1 for n in range(1, 5))

    def test_doppler_diag(self):
        H = ch.channel_matrix(ChannelSpec((PathTap(0, 1, 1),)), 4)
        np.testing.assert_allclose(H, np.diag([1, 1j, -1, -1j]), atol=1e-15)

    def test_delay_too_long(self):
        with pytest.raises(InvalidArgumentError):
            ch.channel_matrix(ChannelSpec((PathTap(4, 0, 1),)), 4)

    def test_matches_oracle(self):
        rng = np.random.default_rng(4)
        spec = ch.draw_channel("doubly-sel", rng)
        taps = [(t.delay, t.doppler, t.gain) for t in spec.taps]
        for c1, start in ((0.0, 0), (7 / 128, 0), (0.031, 5), (0.0, 66)):
            np.testing.assert_allclose(
                ch.channel_matrix(spec, 16, prefix_c1=c1, start=start),
                matrix_oracle(taps, 16, c1, start), atol=1e-12,
            )

    def test_linear_in_gains(self):
        rng = np.random.default_rng(5)
        a = ch.draw_channel("freq-sel", rng)
        b = ch.draw_channel("time-sel", rng)
        joint = ChannelSpec(a.taps + b.taps)
        np.testing.assert_allclose(
            ch.channel_matrix(joint, 8, prefix_c1=0.1),
            ch.channel_matrix(a, 8, prefix_c1=0.1) + ch.channel_matrix(b, 8, prefix_c1=0.1), atol=1e-14,
        )
        twice = ChannelSpec(tuple(PathTap(t.delay, t.doppler, 2 * t.gain) for t in a.taps))
        np.testing.assert_allclose(ch.channel_matrix(twice, 8), 2 * ch.channel_matrix(a, 8), atol=1e-14)

    def test_energy_preserved_on_average(self):
        N = 16
        rng = np.random.default_rng(6)
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        spec = ch.draw_channel("doubly-sel", rng)
        bases = ch.path_matrices(spec.delays, spec.dopplers, N)
        V = bases @ x  # (P, N)
        g = ch.draw_gains(len(spec.taps), rng, size=(100_000,))
        y = g @ V
        ratio = np.mean(np.sum(np.abs(y) ** 2, axis=-1)) / np.sum(np.abs(x) ** 2)
        assert abs(ratio - 1) <= 0.02


class TestApplyChannel:
    def test_identity_noiseless_exact(self):
        cfg = WaveformConfig("OFDM", 8, 2, 1)
        s = wf.modulate(cfg, np.ones((8, 2)))
        out = ch.apply_channel(ChannelSpec.identity(), s, NoiseSpec.none())
        np.testing.assert_array_equal(out.samples, s.samples)

    def test_noise_variance(self):
        sig = wf.TimeSignal(np.zeros(1_000_000, dtype=complex))
        out = ch.apply_channel(ChannelSpec.identity(), sig, NoiseSpec(10.0), np.random.default_rng(8))
        var = np.mean(np.abs(out.samples) ** 2)
        assert abs(var - 0.1) <= 0.001
        # Half the power in each quadrature.
        assert abs(np.mean(out.samples.real ** 2) - 0.05) <= 0.001

    def test_noise_spec(self):
        assert NoiseSpec.none().noiseless and NoiseSpec.none().variance == 0
        assert NoiseSpec(10).variance == pytest.approx(0.1)
        with pytest.raises(InvalidArgumentError):
            NoiseSpec(float("inf"))

    def test_noisy_needs_rng(self):
        sig = wf.TimeSignal(np.zeros(8, dtype=complex))
        with pytest.raises(InvalidArgumentError):
            ch.apply_channel(ChannelSpec.identity(), sig, NoiseSpec(0.0))

    def test_prefix_too_short(self):
        cfg = WaveformConfig("OFDM", 8, 2, 1)
        s = wf.modulate(cfg, np.ones((8, 2)))
        with pytest.raises(InvalidArgumentError):
            ch.apply_channel(ChannelSpec((PathTap(2, 0, 1),)), s, NoiseSpec.none())

    def test_single_delay_matches_matrix(self):
        N, L = 8, 2
        cfg = WaveformConfig("OFDM", N, 1, L)
        x = np.random.default_rng(9).standard_normal((N, 1)) + 0j
        s = wf.modulate(cfg, x)
        spec = ChannelSpec((PathTap(2, 0, 0.5 - 0.25j),))
        y = wf.strip_prefix(cfg, ch.apply_channel(spec, s, NoiseSpec.none()).samples)
        u = wf.block_samples(cfg, x)
        np.testing.assert_allclose(y, matrix_oracle([(2, 0, 0.5 - 0.25j)], N) @ u, atol=1e-10)

    @pytest.mark.parametrize("preset", ["freq-sel", "time-sel", "doubly-sel"])
    @pytest.mark.parametrize("N", [8, 64])
    @pytest.mark.parametrize("kind", ["OFDM", "OCDM", "AFDM", "OTFS"])
    def test_prefix_stripped_equals_matrix(self, preset, N, kind):
        rng = np.random.default_rng(N)
        chirp = ChirpParams.for_doppler_spread(N, 3) if kind == "AFDM" else None
        cfg = WaveformConfig(kind, N, 3, 2, chirp)
        X = rng.standard_normal((N, 3)) + 1j * rng.standard_normal((N, 3))
        spec = ch.draw_channel(preset, rng)
        sig = wf.modulate(cfg, X)
        y = wf.strip_prefix(cfg, ch.apply_channel(spec, sig, NoiseSpec.none()).samples)
        taps = [(t.delay, t.doppler, t.gain) for t in spec.taps]
        H = matrix_oracle(taps, N, cfg.prefix_c1)
        np.testing.assert_allclose(y, H @ wf.block_samples(cfg, X), atol=1e-9)

    def test_continuous_phase(self):
        N, M, L = 8, 3, 2
        cfg = WaveformConfig("OFDM", N, M, L)
        rng = np.random.default_rng(10)
        X = rng.standard_normal((N, M)) + 0j
        spec = ch.draw_channel("doubly-sel", rng)
        sig = wf.modulate(cfg, X)
        y = wf.strip_prefix(cfg, ch.apply_channel(spec, sig, NoiseSpec.none(), continuous_phase=True).samples)
        taps = [(t.delay, t.doppler, t.gain) for t in spec.taps]
        u = wf.block_samples(cfg, X)
        for m, start in enumerate(cfg.block_starts):
            np.testing.assert_allclose(y[:, m], matrix_oracle(taps, N, 0.0, start) @ u[:, m], atol=1e-10)
        # Block restart (default) gives the same matrix for every symbol.
        y0 = wf.strip_prefix(cfg, ch.apply_channel(spec, sig, NoiseSpec.none()).samples)
        np.testing.assert_allclose(y0, matrix_oracle(taps, N) @ u, atol=1e-10)

    def test_otfs_frame_prefix(self):
        N, M, L = 8, 4, 2
        cfg = WaveformConfig("OTFS", N, M, L, otfs_frame_prefix=True)
        rng = np.random.default_rng(11)
        X = rng.standard_normal((N, M)) + 0j
        spec = ch.draw_channel("doubly-sel", rng)
        y = wf.strip_prefix(cfg, ch.apply_channel(spec, wf.modulate(cfg, X), NoiseSpec.none()).samples)
        H = ch.channel_matrix(spec, N, size=N * M)
        u = wf.block_samples(cfg, X)
        np.testing.assert_allclose(y.T.reshape(-1), H @ u.T.reshape(-1), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.floats(0, 1))
def test_superposition_property(seed, N, c1):
    rng = np.random.default_rng(seed)
    L = min(2, N - 1)
    support = [(int(rng.integers(0, L + 1)), int(rng.integers(-3, 4))) for _ in range(3)]
    a = ch.draw_channel("custom", rng, support=support[:2])
    b = ch.draw_channel("custom", rng, support=support[2:])
    x = rng.standard_normal(L + N) + 1j * rng.standard_normal(L + N)
    sig = wf.TimeSignal(x, prefix_len=L, prefix_c1=c1)
    ya = ch.apply_channel(a, sig, NoiseSpec.none()).samples
    yb = ch.apply_channel(b, sig, NoiseSpec.none()).samples
    yab = ch.apply_channel(ChannelSpec(a.taps + b.taps), sig, NoiseSpec.none()).samples
    np.testing.assert_allclose(yab, ya + yb, atol=1e-12)
