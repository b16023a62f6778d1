"""Deterministic SVG figures with companion CSV files.

Colours: averaged / single-record BLA green, concatenated BLA red,
parametric model blue; in distortion plots the excited lines are blue, odd
detection lines magenta, even lines green and the noise floor black.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import db, write_table  # noqa: E402

COLORS = {
    "averaged": "green",
    "single": "green",
    "concat": "red",
    "model": "blue",
    "E": "blue",
    "O": "magenta",
    "V": "green",
    "N": "black",
}
_RC = {"svg.hashsalt": "blalab", "svg.fonttype": "none", "path.simplify": False}


def companion_csv(svg_path) -> Path:
    p = Path(svg_path)
    return p.with_name(p.stem + ".plot.csv")


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _is_concat(est) -> bool:
    cfg = getattr(est, "config", None)
    return cfg is not None and cfg.to_dict().get("kind") == "concat_lpm"


def _band(g, var):
    std = np.sqrt(np.where(np.isfinite(var), var, 0.0))
    mag = np.abs(g)
    return db(g), db(np.maximum(mag - std, 0.0)), db(mag + std), std


def plot_frf(est, path, model=None, label=None):
    """Magnitude in dB with a one-sigma band; optional model overlay."""
    kind = "concat" if _is_concat(est) else "single"
    label = label or ("concatenated LPM" if kind == "concat" else "LPM")
    f = np.asarray(est.freq_hz)
    mag, lo, hi, std = _band(est.g_bla, np.asarray(est.variance, dtype=float))
    model_db = db(model.response(f)) if model is not None else None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.fill_between(f, lo, hi, color=COLORS[kind], alpha=0.25, linewidth=0, label=r"$\pm 1\sigma$")
        ax.plot(f, mag, color=COLORS[kind], linewidth=1.2, label=label)
        if model_db is not None:
            ax.plot(f, model_db, color=COLORS["model"], linewidth=1.2, label=f"model {model.order}")
        ax.set_xlabel("Frequency (Hz)")
        ax.set_ylabel("Magnitude (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        _save(fig, path)
    header = ["freq_hz", "mag_db", "std", "lower_db", "upper_db"] + (["model_db"] if model is not None else [])
    cols = [f, mag, std, lo, hi] + ([model_db] if model is not None else [])
    write_table(companion_csv(path), header, zip(*cols))


def plot_distortion(levels: dict, sample_rate_hz: float, n_fft: int, path):
    """``levels`` maps class codes E/O/V/N to ``(bins, level_db)``."""
    names = {"E": "excited", "O": "odd detection", "V": "even", "N": "noise floor"}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for code in ("E", "O", "V"):
            k, lv = levels[code]
            if len(k):
                ax.plot(np.asarray(k) * sample_rate_hz / n_fft, lv, "o", markersize=2.5,
                        color=COLORS[code], linestyle="none", label=names[code])
        k, lv = levels["N"]
        ax.plot(np.asarray(k) * sample_rate_hz / n_fft, lv, color=COLORS["N"], linewidth=0.8,
                label=names["N"])
        ax.set_xlabel("Frequency (Hz)")
        ax.set_ylabel("Output level (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        _save(fig, path)
    rows = []
    for code in ("E", "O", "V", "N"):
        k, lv = levels[code]
        rows.extend((int(b), b * sample_rate_hz / n_fft, code, float(v)) for b, v in zip(k, lv))
    rows.sort(key=lambda r: (r[0], "EOVN".index(r[2])))
    write_table(companion_csv(path), ["bin", "freq_hz", "class", "level_db"], rows)


def plot_compare(a, b, path, model=None, labels=("LPM averaged", "concatenated LPM")):
    """Two BLAs on one grid with their variance bands, as magnitude and variance in dB."""
    f = np.asarray(a.freq_hz)
    ma, la, ha, sa = _band(a.g_bla, np.asarray(a.variance, dtype=float))
    mb, lb, hb, sb = _band(b.g_bla, np.asarray(b.variance, dtype=float))
    model_db = db(model.response(f)) if model is not None else None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        for mag, lo, hi, std, color, lab in (
            (ma, la, ha, sa, COLORS["averaged"], labels[0]),
            (mb, lb, hb, sb, COLORS["concat"], labels[1]),
        ):
            ax.fill_between(f, lo, hi, color=color, alpha=0.2, linewidth=0)
            ax.plot(f, mag, color=color, linewidth=1.2, label=lab)
            ax.plot(f, db(std), color=color, linewidth=0.8, linestyle=":", label=f"{lab} std")
        if model_db is not None:
            ax.plot(f, model_db, color=COLORS["model"], linewidth=1.2, label=f"model {model.order}")
        ax.set_xlabel("Frequency (Hz)")
        ax.set_ylabel("Magnitude (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize="small")
        _save(fig, path)
    header = ["freq_hz", "a_mag_db", "a_std", "b_mag_db", "b_std"] + (["model_db"] if model is not None else [])
    cols = [f, ma, sa, mb, sb] + ([model_db] if model is not None else [])
    write_table(companion_csv(path), header, zip(*cols))
