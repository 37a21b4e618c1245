import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isac_lab.exceptions import ConfigError, InvalidArgumentError
from isac_lab.harness import cli, output, sweep
from isac_lab.harness.scenario import Scenario, fig5, load_scenario, scenario_from_dict
from isac_lab.harness.seeding import child_seed
from isac_lab.harness.sweep import BerCurve, BerPoint, run_ber_sweep, wilson_interval
from isac_lab.radar import RangeDopplerMap, RangeProfile

DATA = Path(__file__).parent / "data"


def base_doc(**kw):
    doc = {"waveforms": ["OCDM", "AFDM"], "preset": "doubly-sel", "snr_grid": [0, 10], "frames": 10}
    doc.update(kw)
    return doc


def tiny(**kw):
    args = dict(waveforms=("OFDM", "AFDM"), presets=("freq-sel",), snr_grid=(5.0, 15.0), frames=70,
                N=16, M=2, master_seed=5)
    args.update(kw)
    return Scenario(**args)


class TestScenario:
    def test_fig5_builtin(self):
        s = load_scenario("fig5")
        assert s.N == 64 and s.M == 4
        assert s.presets == ("freq-sel", "time-sel", "doubly-sel")
        assert s.snr_grid == (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
        assert s.waveforms == ("OCDM", "AFDM") and s.prefix_len == 2
        cfgs = s.waveform_configs("doubly-sel")
        assert cfgs[0].constellation == "QAM16"
        assert cfgs[1].chirp.c1 == 7 / 128 and cfgs[1].chirp.c2 == 1 / 8192
        # Doppler-free preset: a_max = 0 gives c1 = 1/(2N).
        assert s.waveform_configs("freq-sel")[1].chirp.c1 == 1 / 128

    def test_load_file(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps(base_doc(stop_rule={"min_errors": 50}, doppler_phase="continuous",
                                         afdm_chirp={"c1": 0.05, "c2": 0.001}, preset=["freq-sel", "time-sel"])))
        s = load_scenario(p)
        assert s.min_errors == 50 and s.continuous_phase and s.presets == ("freq-sel", "time-sel")
        assert s.waveform_configs("time-sel")[1].chirp.c1 == 0.05

    @pytest.mark.parametrize("key", ["waveforms", "preset", "snr_grid", "frames"])
    def test_missing_required(self, key):
        doc = base_doc()
        del doc[key]
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(doc)
        assert exc.value.key == key and key in str(exc.value)

    @pytest.mark.parametrize("key,value", [
        ("snr_grid", [10, 5]),
        ("snr_grid", [0, 0]),
        ("snr_grid", []),
        ("snr_grid", [0, "x"]),
        ("frames", 0),
        ("frames", 2.5),
        ("frames", True),
        ("waveforms", []),
        ("waveforms", ["QPSK-OFDM"]),
        ("preset", "rician"),
        ("preset", "custom"),
        ("master_seed", -1),
        ("N", 1),
        ("prefix_len", 1),
        ("stop_rule", {"min_errors": 0}),
        ("stop_rule", {"errors": 5}),
        ("doppler_phase", "random"),
        ("otfs_frame_prefix", "yes"),
        ("afdm_chirp", {"c1": 0.1}),
        ("afdm_chirp", {"c1": "a", "c2": 0.1}),
        ("noiseless", 1),
        ("name", 3),
    ])
    def test_bad_values(self, key, value):
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(base_doc(**{key: value}))
        assert exc.value.key.split(".")[0] == key

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(base_doc(frame_count=3))
        assert exc.value.key == "frame_count"

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_scenario(p)
        with pytest.raises(ConfigError):
            scenario_from_dict([1, 2])

    def test_prefix_too_long(self):
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(base_doc(N=4, prefix_len=4))
        assert exc.value.key == "prefix_len"

    def test_dataclass_invariants(self):
        with pytest.raises(ConfigError):
            tiny(frames=0)
        with pytest.raises(ConfigError):
            tiny(snr_grid=(5.0, 5.0))
        assert tiny().with_seed(9).master_seed == 9


class TestSeeding:
    def test_stable_and_distinct(self):
        a = child_seed(0, 1, 2, 3)
        assert a == child_seed(0, 1, 2, 3)
        seeds = {child_seed(0, p, s, f) for p in range(3) for s in range(7) for f in range(50)}
        assert len(seeds) == 3 * 7 * 50
        assert child_seed(1, 1, 2, 3) != a

    def test_frozen_value(self):
        # Guards the documented splitting function against silent changes.
        expect = int(np.random.SeedSequence(7, spawn_key=(0, 1, 2)).generate_state(1, np.uint64)[0])
        assert child_seed(7, 0, 1, 2) == expect


def wilson_oracle(k, n, z=sweep.Z95):
    # Wilson's interval is {p : (phat - p)^2 <= z^2 p (1 - p) / n}; find its ends by bisection.
    phat = k / n

    def inside(p):
        return (phat - p) ** 2 <= z * z * p * (1 - p) / n

    def edge(lo, hi):
        for _ in range(200):
            mid = (lo + hi) / 2
            if inside(mid) == inside(lo):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    low = 0.0 if inside(0.0) else edge(0.0, phat)
    high = 1.0 if inside(1.0) else edge(phat, 1.0)
    return low, high


class TestWilson:
    @pytest.mark.parametrize("k,n", [(0, 10), (1, 10), (5, 10), (10, 10), (37, 1000), (123, 256000)])
    def test_matches_oracle(self, k, n):
        lo, hi = wilson_interval(k, n)
        olo, ohi = wilson_oracle(k, n)
        assert lo == pytest.approx(olo, abs=1e-9) and hi == pytest.approx(ohi, abs=1e-9)

    @given(st.integers(1, 10**7), st.data())
    def test_contains_ber(self, n, data):
        k = data.draw(st.integers(0, n))
        lo, hi = wilson_interval(k, n)
        assert 0 <= lo <= k / n <= hi <= 1

    def test_shrinks_with_frames(self):
        s = tiny(waveforms=("OFDM",), snr_grid=(10.0,))
        a = run_ber_sweep(replace(s, frames=1000))[0].points[0]
        b = run_ber_sweep(replace(s, frames=4000))[0].points[0]
        wa = a.interval[1] - a.interval[0]
        wb = b.interval[1] - b.interval[0]
        assert abs(wa / wb - 2.0) <= 0.2

    def test_empty(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)


class TestSweep:
    def test_identity_noiseless_zero(self):
        s = tiny(waveforms=("OFDM", "OCDM", "AFDM", "OTFS"), presets=("identity",), noiseless=True, frames=20)
        curve = run_ber_sweep(s)[0]
        assert len(curve.points) == 8 and all(p.errors == 0 and p.ber == 0 for p in curve.points)

    def test_curve_structure(self):
        curves = run_ber_sweep(tiny(presets=("freq-sel", "time-sel")))
        assert [c.preset for c in curves] == ["freq-sel", "time-sel"]
        c = curves[0]
        assert c.waveforms == ["OFDM", "AFDM"]
        p = c.point("AFDM", 15.0)
        assert p.bits == 70 * 16 * 2 * 4 and p.frames == 70
        assert p.ber == p.errors / p.bits
        assert c.point("OFDM", 5.0).ber > c.point("OFDM", 15.0).ber
        with pytest.raises(KeyError):
            c.point("OTFS", 5.0)

    def test_independent_of_workers(self):
        s = tiny(presets=("doubly-sel",), frames=150)
        a = run_ber_sweep(s, workers=1)
        b = run_ber_sweep(s, workers=3)
        assert a == b

    def test_common_random_numbers(self):
        # The waveform is not part of the seed address; reordering waveforms changes nothing.
        a = run_ber_sweep(tiny(waveforms=("OFDM", "AFDM")))[0]
        b = run_ber_sweep(tiny(waveforms=("AFDM", "OFDM")))[0]
        for wf in ("OFDM", "AFDM"):
            assert a.series(wf) == b.series(wf)

    def test_frames_not_multiple_of_chunk(self):
        s = tiny(frames=sweep.CHUNK_FRAMES + 3)
        assert run_ber_sweep(s)[0].points[0].frames == sweep.CHUNK_FRAMES + 3

    def test_stop_rule(self):
        s = tiny(frames=640, min_errors=200, snr_grid=(0.0, 30.0))
        curve = run_ber_sweep(s)[0]
        low = curve.point("OFDM", 0.0)
        assert low.errors >= 200 and low.frames < 640 and low.frames % sweep.CHUNK_FRAMES == 0
        assert run_ber_sweep(s, workers=2) == [curve]

    def test_progress_callback(self):
        seen = []
        run_ber_sweep(tiny(frames=5), progress=lambda p, snr: seen.append((p, snr)))
        assert seen == [("freq-sel", 5.0), ("freq-sel", 15.0)]


class TestOutput:
    def one_point(self):
        return BerCurve("freq-sel", [BerPoint("OCDM", 10.0, 1000, 37, 4)])

    def test_two_line_csv(self, tmp_path):
        path = output.emit_csv(self.one_point(), tmp_path / "a.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert lines[0] == "waveform,snr_db,bits,errors,ber,ci_low,ci_high"
        fields = lines[1].split(",")
        assert fields[:4] == ["OCDM", "10.0", "1000", "37"]
        lo, hi = wilson_interval(37, 1000)
        assert float(fields[4]) == 0.037 and float(fields[5]) == lo and float(fields[6]) == hi

    def test_empty_curve(self, tmp_path):
        target = tmp_path / "empty.csv"
        with pytest.raises(InvalidArgumentError):
            output.emit_csv(BerCurve("freq-sel"), target)
        assert not target.exists()
        with pytest.raises(InvalidArgumentError):
            output.emit_svg_plot([BerCurve("x")], tmp_path / "e.svg")
        assert not (tmp_path / "e.svg").exists()

    def test_unknown_type(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            output.emit_csv({"a": 1}, tmp_path / "x.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            output.emit_csv(self.one_point(), tmp_path / "missing" / "a.csv")

    def test_map_round_trip(self, tmp_path):
        mags = np.abs(np.random.default_rng(0).standard_normal((4, 6)))
        rd = RangeDopplerMap(mags, 0.15, 0.3, 2)
        path = output.emit_csv(rd, tmp_path / "m.csv")
        header = path.read_text().splitlines()[0]
        assert header == "range_bin_m=0.15,velocity_bin_mps=0.3,zero_velocity_row=2,rows=4,cols=6"
        back = output.load_map_csv(path)
        np.testing.assert_allclose(back.magnitudes, mags, rtol=1e-11)
        assert (back.range_bin_m, back.velocity_bin_mps, back.zero_velocity_row) == (0.15, 0.3, 2)

    def test_profile_csv(self, tmp_path):
        prof = RangeProfile(np.array([[1.0], [2.0], [0.5]]), 0.15, 10.0)
        text = output.emit_csv(prof, tmp_path / "p.csv").read_text().splitlines()
        assert text[0] == "range_bin_m=0.15,max_velocity_mps=10.0"
        assert text[1] == "range_m,magnitude"
        assert text[3] == "0.15,2"

    def test_svg_deterministic(self, tmp_path):
        curves = run_ber_sweep(tiny(frames=10, presets=("freq-sel", "time-sel")))
        a = output.emit_svg_plot(curves, tmp_path / "a.svg", title="t").read_bytes()
        b = output.emit_svg_plot(curves, tmp_path / "b.svg", title="t").read_bytes()
        assert a == b
        text = a.decode()
        assert text.startswith("<?xml") and "<svg" in text
        for label in ("SNR [dB]", "BER", "OFDM, freq-sel", "AFDM, time-sel"):
            assert label in text

    def test_golden_csv_text(self):
        s = load_scenario(DATA / "fig5_smoke.json")
        text = output.ber_csv_text(run_ber_sweep(s)[0])
        assert text == (DATA / "golden_fig5_smoke.csv").read_text(encoding="utf-8")


class TestCli:
    def write(self, tmp_path, name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    def test_ber_golden_bytes(self, tmp_path):
        out1, out8 = tmp_path / "w1.csv", tmp_path / "w8.csv"
        scen = str(DATA / "fig5_smoke.json")
        assert cli.main(["ber", "--scenario", scen, "--out", str(out1)]) == 0
        assert cli.main(["ber", "--scenario", scen, "--out", str(out8), "--workers", "8"]) == 0
        golden = (DATA / "golden_fig5_smoke.csv").read_bytes()
        assert out1.read_bytes() == golden and out8.read_bytes() == golden

    def test_ber_multi_preset_and_svg(self, tmp_path):
        scen = self.write(tmp_path, "s.json", base_doc(preset=["freq-sel", "time-sel"], N=16, M=1, frames=3))
        out = tmp_path / "r.csv"
        assert cli.main(["ber", "--scenario", scen, "--out", str(out), "--svg", str(tmp_path / "r.svg")]) == 0
        assert (tmp_path / "r_freq-sel.csv").exists() and (tmp_path / "r_time-sel.svg").exists()

    def test_seed_precedence(self, tmp_path, monkeypatch):
        scen = self.write(tmp_path, "s.json", base_doc(N=16, M=1, frames=5, master_seed=1))

        def run(name, *extra):
            p = tmp_path / name
            assert cli.main(["ber", "--scenario", scen, "--out", str(p), *extra]) == 0
            return p.read_bytes()

        monkeypatch.delenv(cli.SEED_ENV, raising=False)
        from_file = run("a.csv")
        flag9 = run("b.csv", "--seed", "9")
        monkeypatch.setenv(cli.SEED_ENV, "9")
        env9 = run("c.csv")
        monkeypatch.setenv(cli.SEED_ENV, "4")
        flag_wins = run("d.csv", "--seed", "9")
        assert env9 == flag9 == flag_wins and from_file != flag9

    def test_bad_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "abc")
        assert cli.main(["papr", "--waveform", "OFDM", "--frames", "2", "--out", str(tmp_path / "p.csv")]) == 1

    @pytest.mark.parametrize("argv", [
        ["ber", "--scenario", "/nonexistent.json", "--out", "x.csv"],
        ["ber", "--out", "x.csv"],
        ["bogus"],
        ["papr", "--waveform", "FBMC", "--frames", "3", "--out", "x.csv"],
        ["papr", "--waveform", "OFDM", "--frames", "0", "--out", "x.csv"],
        ["stepped", "--m", "0", "--out", "x.csv"],
        ["ofdm-radar", "--config", "/nonexistent.json", "--shift", "1,2", "--out", "x.csv"],
    ])
    def test_config_errors_exit_1(self, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        with pytest.raises(SystemExit) as exc:
            raise SystemExit(cli.main(argv))
        assert exc.value.code == 1
        assert not (tmp_path / "x.csv").exists()

    def test_bad_scenario_key_exit_1(self, tmp_path, capsys):
        scen = self.write(tmp_path, "s.json", base_doc(snr_grid=[10, 5]))
        assert cli.main(["ber", "--scenario", scen, "--out", str(tmp_path / "x.csv")]) == 1
        assert "snr_grid" in capsys.readouterr().err

    def test_runtime_error_exit_2_no_partial_output(self, tmp_path, monkeypatch):
        def boom(task):
            raise RuntimeError("worker died")

        monkeypatch.setattr(sweep, "_run_chunk", boom)
        scen = self.write(tmp_path, "s.json", base_doc(N=16, M=1, frames=3))
        out = tmp_path / "x.csv"
        assert cli.main(["ber", "--scenario", scen, "--out", str(out)]) == 2
        assert not out.exists()

    def test_fmcw(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "c.json", {"f_c": 77e9, "B": 1e9, "T": 100e-6, "fs": 20e6, "n_chirps": 16})
        tg = self.write(tmp_path, "t.json", [{"range": 30.0, "velocity": 0.0}])
        out = tmp_path / "rd.csv"
        assert cli.main(["fmcw", "--config", cfg, "--targets", tg, "--out", str(out)]) == 0
        rd = output.load_map_csv(out)
        assert rd.range_bin_m == 0.15 and rd.peak_bins() == (8, 200)
        assert "30.0000 m" in capsys.readouterr().out

    def test_fmcw_bad_target(self, tmp_path):
        cfg = self.write(tmp_path, "c.json", {"f_c": 77e9, "B": 1e9, "T": 100e-6, "fs": 20e6})
        tg = self.write(tmp_path, "t.json", [{"distance": 3}])
        assert cli.main(["fmcw", "--config", cfg, "--targets", tg, "--out", str(tmp_path / "o.csv")]) == 1

    def test_fmcw_out_of_range_target_is_runtime(self, tmp_path):
        cfg = self.write(tmp_path, "c.json", {"f_c": 77e9, "B": 1e9, "T": 100e-6, "fs": 20e6})
        tg = self.write(tmp_path, "t.json", [{"range": 1000.0}])
        assert cli.main(["fmcw", "--config", cfg, "--targets", tg, "--out", str(tmp_path / "o.csv")]) == 2

    def test_ofdm_radar(self, tmp_path):
        cfg = self.write(tmp_path, "c.json", {"n_subcarriers": 64, "n_symbols": 16})
        out = tmp_path / "o.csv"
        assert cli.main(["ofdm-radar", "--config", cfg, "--shift", "5,2", "--out", str(out)]) == 0
        assert output.load_map_csv(out).peak_bins() == (2, 5)
        assert cli.main(["ofdm-radar", "--config", cfg, "--shift", "5", "--out", str(out)]) == 1

    def test_papr(self, tmp_path):
        out = tmp_path / "p.csv"
        assert cli.main(["papr", "--waveform", "OCDM", "--frames", "200", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "papr_db,ccdf" and lines[1] == "0.0,1.0"
        vals = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_stepped(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert cli.main(["stepped", "--m", "4", "--out", str(out)]) == 0
        assert out.read_text().startswith("range_bin_m=0.15,")
        assert "peak at 10.0500 m" in capsys.readouterr().out

    def test_module_entry_point(self):
        import subprocess
        import sys

        r = subprocess.run([sys.executable, "-m", "isac_lab", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "ber" in r.stdout


def test_sweep_math_consistency():
    p = BerPoint("AFDM", 0.0, 4000, 40)
    assert p.std_error == pytest.approx(math.sqrt(0.01 * 0.99 / 4000))
    lo, hi = p.interval
    assert lo < p.ber < hi


def test_frame_std_error_matches_per_frame_oracle():
    sc = tiny(waveforms=("OFDM", "OCDM"), presets=("doubly-sel",), snr_grid=(5.0,))
    (curve,) = run_ber_sweep(sc)
    cfgs = sc.waveform_configs("doubly-sel")
    from isac_lab.detection import BatchLink

    errs = BatchLink(cfgs, "doubly-sel").run(5.0, [child_seed(sc.master_seed, 0, 0, f) for f in range(70)])
    for k, name in enumerate(sc.waveforms):
        per_frame = errs[k] / cfgs[k].bits_per_frame
        pt = curve.point(name, 5.0)
        assert pt.errors_sq == int(np.sum(errs[k].astype(np.int64) ** 2))
        assert pt.frame_std_error == pytest.approx(per_frame.std(ddof=1) / math.sqrt(70), rel=1e-9)
    assert math.isnan(BerPoint("OFDM", 0.0, 100, 3, 1, 9).frame_std_error)


class TestConventionFlags:
    def test_keys_parsed(self):
        sc = scenario_from_dict(base_doc(channel_redraw="block", equalization="frame"))
        assert (sc.redraw, sc.equalization) == ("block", "frame")
        assert scenario_from_dict(base_doc()).redraw == "frame"

    @pytest.mark.parametrize("key,value", [("channel_redraw", "symbol"), ("equalization", "joint"),
                                           ("channel_redraw", True)])
    def test_bad_values(self, key, value):
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(base_doc(**{key: value}))
        assert exc.value.key == key

    def test_otfs_block_redraw_rejected(self):
        with pytest.raises(ConfigError) as exc:
            scenario_from_dict(base_doc(waveforms=["OTFS"], channel_redraw="block"))
        assert exc.value.key == "channel_redraw"

    def test_joint_equalization_sweep_identical(self):
        sc = tiny(presets=("doubly-sel",), frames=40)
        a = run_ber_sweep(sc)[0].points
        b = run_ber_sweep(replace(sc, equalization="frame"))[0].points
        assert a == b

    def test_block_redraw_sweep_runs(self):
        sc = tiny(presets=("time-sel",), frames=40, redraw="block")
        (curve,) = run_ber_sweep(sc)
        assert all(0 < p.errors < p.bits for p in curve.points if p.snr_db == 5.0)


def test_fig5_factory():
    assert fig5(frames=10, master_seed=3).frames == 10
