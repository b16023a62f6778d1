"""Text file formats for records, estimates, reports and provenance.

Floats are written with ``repr`` (shortest string that round-trips), so
reading a file back reproduces the in-memory values bit for bit. Every CSV
may carry a sidecar ``<stem>.meta.json`` with metadata.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .aggregate import CommonBla
from .concat import ConcatConfig
from .distortion import CLASS_CODES, DistortionReport
from .lpm import FrfEstimate, LpmConfig
from .signal import OperatingPoint, SignalRecord

RECORD_HEADER = ["time_s", "input", "output"]
FRF_HEADER = ["bin", "freq_hz", "g_re", "g_im", "g_mag_db", "noise_var", "g_var", "dof", "t_re", "t_im"]
COMMON_HEADER = ["bin", "freq_hz", "c_re", "c_im", "mag_db", "sample_var"]
DIST_HEADER = ["bin", "freq_hz", "class", "level_db"]
TIME_TOL_S = 1e-9


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def fmt(x) -> str:
    return repr(float(x))


def db(x) -> np.ndarray:
    return 20 * np.log10(np.maximum(np.abs(x), np.finfo(float).tiny))


def sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path, header=None):
    """Rows of a CSV file as string lists; checks the header and column count."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    with fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if header is not None and found != header:
            raise InputError(f"{path}:1: expected header {','.join(header)}, got {','.join(found)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(found):
                raise InputError(f"{path}:{lineno}: expected {len(found)} fields, got {len(row)}")
            rows.append((lineno, row))
    return found, rows


def _float(path, lineno, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{path}:{lineno}: cannot parse {text!r} as a number") from None


def _int(path, lineno, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise InputError(f"{path}:{lineno}: cannot parse {text!r} as an integer") from None


def _columns(path, rows, kinds):
    cols = [[] for _ in kinds]
    for lineno, row in rows:
        for j, kind in enumerate(kinds):
            if kind == "f":
                cols[j].append(_float(path, lineno, row[j]))
            elif kind == "i":
                cols[j].append(_int(path, lineno, row[j]))
            else:
                cols[j].append(row[j])
    return cols


# -- records ---------------------------------------------------------------

def write_record(path, u: SignalRecord, y: SignalRecord):
    """``time_s,input,output`` CSV plus metadata sidecar."""
    if u.samples.size != y.samples.size:
        raise ValueError("input and output lengths differ")
    t = u.time_s
    _write_rows(path, RECORD_HEADER, ((fmt(a), fmt(b), fmt(c)) for a, b, c in zip(t, u.samples, y.samples)))
    meta = {
        "sample_rate_hz": float(u.sample_rate_hz),
        "samples_per_period": int(u.samples_per_period),
        "n_periods": int(u.n_periods),
    }
    meta.update(u.metadata.to_dict())
    dump_json(sidecar(path), meta)


def read_record(path) -> tuple[SignalRecord, SignalRecord]:
    meta = load_json(sidecar(path))
    try:
        fs = float(meta["sample_rate_hz"])
        n = int(meta["samples_per_period"])
        p = int(meta["n_periods"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{sidecar(path)}: missing or invalid field ({exc})") from None
    _, rows = _read_rows(path, RECORD_HEADER)
    if len(rows) != n * p:
        raise InputError(
            f"{path}: {len(rows)} data rows but metadata declares {n} x {p} = {n * p} samples"
        )
    t, u, y = (np.asarray(c) for c in _columns(path, rows, "fff"))
    if t.size:
        bad = np.flatnonzero(np.abs(np.diff(t) - 1.0 / fs) > TIME_TOL_S)
        if bad.size:
            raise InputError(f"{path}:{bad[0] + 3}: time step deviates from 1/sample_rate_hz")
    op = OperatingPoint.from_dict(meta)
    return SignalRecord(u, fs, n, p, op), SignalRecord(y, fs, n, p, op)


# -- FRF estimates ---------------------------------------------------------

def _config_from_dict(d):
    if not d:
        return None
    if d.get("kind") == "concat_lpm":
        return ConcatConfig(d["poly_order_R"], d["half_window_n"], tuple(d["band_bins"]),
                            d.get("estimate_noise_var", True))
    return LpmConfig(d["poly_order_R"], d["half_window_n"], tuple(d["band_bins"]))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, OperatingPoint):
        return v.to_dict()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def transients_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".transients.csv")


def write_frf(path, est: FrfEstimate):
    """FRF CSV; concatenated estimates also get ``<stem>.transients.csv``."""
    rows = (
        (str(int(k)), fmt(f), fmt(g.real), fmt(g.imag), fmt(m), fmt(nv), fmt(gv), str(int(d)),
         fmt(t.real), fmt(t.imag))
        for k, f, g, m, nv, gv, d, t in zip(
            est.bins, est.freq_hz, est.g_bla, db(est.g_bla), est.noise_var, est.g_var, est.dof,
            est.transient,
        )
    )
    _write_rows(path, FRF_HEADER, rows)
    st = est.splice_transients
    n_blocks = 1 if st is None else st.shape[1]
    if n_blocks > 1:
        header = ["bin"] + [f"t{j}_{part}" for j in range(n_blocks) for part in ("re", "im")]
        _write_rows(
            transients_path(path), header,
            ([str(int(k))] + [fmt(v) for t in row for v in (t.real, t.imag)] for k, row in zip(est.bins, st)),
        )
    cfg = est.config.to_dict() if hasattr(est.config, "to_dict") else None
    dump_json(sidecar(path), {
        "kind": "frf",
        "n_fft": int(est.n_fft),
        "sample_rate_hz": float(est.sample_rate_hz),
        "config": cfg,
        "n_transient_blocks": int(n_blocks),
        "meta": _jsonable(est.meta),
    })


def read_frf(path) -> FrfEstimate:
    meta = load_json(sidecar(path))
    _, rows = _read_rows(path, FRF_HEADER)
    if not rows:
        raise InputError(f"{path}: no data rows")
    k, _, gr, gi, _, nv, gv, dof, tr, ti = _columns(path, rows, "iffffffiff")
    bins = np.asarray(k, dtype=int)
    trans = np.asarray(tr) + 1j * np.asarray(ti)
    splice = trans[:, None].copy()
    if int(meta.get("n_transient_blocks", 1)) > 1:
        _, trows = _read_rows(transients_path(path))
        vals = np.asarray(_columns(transients_path(path), trows, "i" + "f" * (len(trows[0][1]) - 1))[1:])
        splice = (vals[0::2] + 1j * vals[1::2]).T
    return FrfEstimate(
        bins=bins,
        g_bla=np.asarray(gr) + 1j * np.asarray(gi),
        transient=trans,
        noise_var=np.asarray(nv),
        g_var=np.asarray(gv),
        dof=np.asarray(dof, dtype=int),
        config=_config_from_dict(meta.get("config")),
        n_fft=int(meta["n_fft"]),
        sample_rate_hz=float(meta["sample_rate_hz"]),
        splice_transients=splice,
        meta=meta.get("meta") or {},
    )


# -- common BLA ------------------------------------------------------------

def write_common(path, c: CommonBla):
    rows = (
        (str(int(k)), fmt(f), fmt(g.real), fmt(g.imag), fmt(m), fmt(v))
        for k, f, g, m, v in zip(c.bins, c.freq_hz, c.c_bla, db(c.c_bla), c.sample_var)
    )
    _write_rows(path, COMMON_HEADER, rows)
    dump_json(sidecar(path), {
        "kind": "common_bla",
        "m_experiments": int(c.m_experiments),
        "n_fft": int(c.n_fft),
        "sample_rate_hz": float(c.sample_rate_hz),
        "member_meta": [_jsonable(m) for m in c.member_meta],
    })


def read_common(path) -> CommonBla:
    meta = load_json(sidecar(path))
    _, rows = _read_rows(path, COMMON_HEADER)
    if not rows:
        raise InputError(f"{path}: no data rows")
    k, _, cr, ci, _, sv = _columns(path, rows, "ifffff")
    return CommonBla(
        bins=np.asarray(k, dtype=int),
        c_bla=np.asarray(cr) + 1j * np.asarray(ci),
        sample_var=np.asarray(sv),
        m_experiments=int(meta["m_experiments"]),
        n_fft=int(meta["n_fft"]),
        sample_rate_hz=float(meta["sample_rate_hz"]),
        member_meta=[OperatingPoint.from_dict(m) for m in meta.get("member_meta", [])],
    )


def read_estimate(path):
    """Read either an FRF estimate or a common BLA, chosen by the CSV header."""
    header, _ = _read_rows(path)
    if header == FRF_HEADER:
        return read_frf(path)
    if header == COMMON_HEADER:
        return read_common(path)
    raise InputError(f"{path}:1: header matches neither an FRF nor a common BLA file")


def write_estimate(path, est):
    if isinstance(est, CommonBla):
        write_common(path, est)
    else:
        write_frf(path, est)


# -- distortion ------------------------------------------------------------

def write_distortion(path, rep: DistortionReport):
    """One row per (bin, class); the noise floor row exists for every in-band bin."""
    rows = []
    fs, n = rep.sample_rate_hz, rep.n_fft
    for name, levels in rep.classes().items():
        code = CLASS_CODES[name]
        rows.extend((int(k), code, float(v)) for k, v in zip(levels.bins, levels.level_db))
    order = {c: i for i, c in enumerate("EOVN")}
    rows.sort(key=lambda r: (r[0], order[r[1]]))
    _write_rows(path, DIST_HEADER, ((str(k), fmt(k * fs / n), c, fmt(v)) for k, c, v in rows))
    dump_json(sidecar(path), {
        "kind": "distortion",
        "n_fft": int(n),
        "sample_rate_hz": float(fs),
        "n_periods": int(rep.n_periods),
        "operating_point": rep.meta.to_dict(),
        "class_mean_power_db": {name: _jsonable(lv.mean_power_db()) for name, lv in rep.classes().items()},
    })


def read_distortion(path) -> dict:
    """Distortion CSV as ``{class_code: (bins, level_db)}``."""
    _, rows = _read_rows(path, DIST_HEADER)
    k, _, cls, lvl = _columns(path, rows, "ifsf")
    k, cls, lvl = np.asarray(k, dtype=int), np.asarray(cls), np.asarray(lvl)
    out = {}
    for code in CLASS_CODES.values():
        sel = cls == code
        out[code] = (k[sel], lvl[sel])
    unknown = set(cls.tolist()) - set(CLASS_CODES.values())
    if unknown:
        raise InputError(f"{path}: unknown class code(s) {sorted(unknown)}")
    return out


def write_table(path, header, rows):
    """Generic CSV with floats in round-trip form."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        return str(v)

    _write_rows(path, header, ([cell(v) for v in row] for row in rows))


def provenance_path(out) -> Path:
    p = Path(out)
    return p.with_name(p.name + ".provenance.json")


def write_provenance(out, command: str, argv, config: dict, seed, inputs, outputs, version: str):
    """Everything needed to rerun the producing command; no timestamps."""
    dump_json(provenance_path(out), {
        "tool": "blalab",
        "version": version,
        "command": command,
        "argv": list(argv),
        "config": _jsonable(config),
        "seed": seed,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "outputs": [str(p) for p in outputs],
    })
