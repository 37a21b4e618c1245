"""CSV and SVG emission. Output bytes depend only on the data passed in."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from ..exceptions import InvalidArgumentError
from ..radar import RangeDopplerMap, RangeProfile
from .sweep import BerCurve

BER_HEADER = "waveform,snr_db,bits,errors,ber,ci_low,ci_high"


def _num(x: float) -> str:
    return repr(float(x))


def _write(path, text: str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def ber_csv_text(curve: BerCurve) -> str:
    if not curve.points:
        raise InvalidArgumentError("cannot emit an empty BER curve")
    lines = [BER_HEADER]
    for p in curve.points:
        lo, hi = p.interval
        lines.append(",".join([p.waveform, _num(p.snr_db), str(p.bits), str(p.errors), _num(p.ber), _num(lo), _num(hi)]))
    return "\n".join(lines) + "\n"


def map_csv_text(rd: RangeDopplerMap) -> str:
    mags = np.asarray(rd.magnitudes)
    if mags.size == 0:
        raise InvalidArgumentError("cannot emit an empty map")
    buf = io.StringIO()
    buf.write(
        f"range_bin_m={_num(rd.range_bin_m)},velocity_bin_mps={_num(rd.velocity_bin_mps)},"
        f"zero_velocity_row={rd.zero_velocity_row},rows={mags.shape[0]},cols={mags.shape[1]}\n"
    )
    np.savetxt(buf, mags, delimiter=",", fmt="%.12g")
    return buf.getvalue()


def profile_csv_text(profile: RangeProfile) -> str:
    mags = np.atleast_2d(np.asarray(profile.magnitudes).T).T
    if mags.size == 0:
        raise InvalidArgumentError("cannot emit an empty range profile")
    k = mags.shape[1]
    cols = ["magnitude"] if k == 1 else [f"magnitude_{i}" for i in range(k)]
    lines = [
        f"range_bin_m={_num(profile.range_bin_m)},max_velocity_mps={_num(profile.max_velocity_mps)}",
        ",".join(["range_m"] + cols),
    ]
    for i, row in enumerate(mags):
        lines.append(",".join([f"{i * profile.range_bin_m:.12g}"] + [f"{v:.12g}" for v in row]))
    return "\n".join(lines) + "\n"


def emit_csv(data, path) -> Path:
    """Write a :class:`BerCurve`, :class:`RangeDopplerMap` or :class:`RangeProfile` as CSV.

    Validation happens before the file is opened, so invalid data never
    leaves a file behind.
    """
    if isinstance(data, BerCurve):
        text = ber_csv_text(data)
    elif isinstance(data, RangeDopplerMap):
        text = map_csv_text(data)
    elif isinstance(data, RangeProfile):
        text = profile_csv_text(data)
    else:
        raise InvalidArgumentError(f"don't know how to write {type(data).__name__} as CSV")
    return _write(path, text)


def load_map_csv(path) -> RangeDopplerMap:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        meta = dict(item.split("=", 1) for item in header.split(","))
        mags = np.loadtxt(fh, delimiter=",", ndmin=2)
    return RangeDopplerMap(
        mags, float(meta["range_bin_m"]), float(meta["velocity_bin_mps"]), int(meta["zero_velocity_row"])
    )


def emit_svg_plot(curves, path, title: str | None = None) -> Path:
    """BER vs SNR on a log axis, one line per (preset, waveform)."""
    curves = [curves] if isinstance(curves, BerCurve) else list(curves)
    if not curves or not any(c.points for c in curves):
        raise InvalidArgumentError("cannot plot empty BER curves")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "isac-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        try:
            markers = "osd^v<>"
            for ci, curve in enumerate(curves):
                for wi, wf in enumerate(curve.waveforms):
                    pts = curve.series(wf)
                    snr = [p.snr_db for p in pts]
                    # Zero-error points cannot be drawn on a log axis.
                    ber = [p.ber if p.errors else np.nan for p in pts]
                    label = wf if len(curves) == 1 else f"{wf}, {curve.preset}"
                    ax.semilogy(snr, ber, marker=markers[wi % len(markers)],
                                linestyle=["-", "--", ":"][ci % 3], label=label)
            ax.set_xlabel("SNR [dB]")
            ax.set_ylabel("BER")
            ax.grid(True, which="both", alpha=0.3)
            ax.legend()
            if title:
                ax.set_title(title)
            fig.tight_layout()
            path = Path(path)
            fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        finally:
            plt.close(fig)
    return path
