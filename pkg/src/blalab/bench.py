"""Seeded benchmark scenarios checked against the simulator's ground truth.

Each scenario returns a metrics map; pass/fail is decided only by comparing
those metrics with the versioned table in ``thresholds.json``.
"""
from __future__ import annotations

import contextlib
import csv
import json
import math
import os
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .aggregate import average_blas, restrict_to_grid
from .concat import ConcatConfig, ConcatConfigError, ConcatDataset, MixedOperatingPointsWarning, estimate_frf_concat
from .distortion import analyze
from .fit import fit_tf, select_order
from .lpm import LpmConfig, estimate_frf
from .signal import OperatingPoint, SignalRecord, design_multisine, render_multisine
from .simulator import (
    WienerSurrogate,
    bussgang_factor,
    cross_spectral_bla,
    default_linear_block,
    make_campaign,
    simulate,
    true_bla,
)
from .spectral import dft, period_spectra

_OPS = {
    "<": lambda v, t: v < t,
    "<=": lambda v, t: v <= t,
    ">": lambda v, t: v > t,
    ">=": lambda v, t: v >= t,
    "==": lambda v, t: v == t,
}

FS, N, BAND = 50.0, 5000, (1.0, 5.0)


class UnknownScenarioError(KeyError):
    pass


def load_thresholds() -> dict:
    text = resources.files("blalab").joinpath("thresholds.json").read_text()
    return json.loads(text)


def evaluate(metrics: dict, limits: dict) -> list[str]:
    """Names of the thresholds the metrics violate (missing or NaN metrics fail)."""
    failed = []
    for name, (op, value) in sorted(limits.items()):
        v = metrics.get(name)
        if v is None or (isinstance(v, float) and math.isnan(v)) or not _OPS[op](v, value):
            failed.append(f"{name} {op} {value} (got {v})")
    return failed


@dataclass
class ScenarioResult:
    scenario_id: str
    metrics: dict
    config: dict
    limits: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def runtime_s(self) -> float:
        return float(self.metrics.get("runtime_s", math.nan))


def _rel_err(g, ref):
    return np.abs(g - ref) / np.abs(ref)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- scenarios -------------------------------------------------------------

def design_arithmetic(art):
    worst = 0.0
    for grid in ("full", "odd_random"):
        spec = design_multisine(BAND, FS, N, grid, rms_target=10.0, seed=0)
        rec = render_multisine(spec, 7)
        worst = max(worst, abs(rec.rms - 10.0))
    metrics = {
        "resolution_err_hz": abs(spec.frequency_resolution_hz - 0.01),
        "bin_lo": spec.band_bins[0],
        "bin_hi": spec.band_bins[1],
        "n_samples": rec.samples.size,
        "max_rms_err": worst,
    }
    return metrics, {"band_hz": BAND, "fs": FS, "N": N, "periods": 7, "grids": ["full", "odd_random"]}


def _transient_case(n_fft, seed=0, state=(1.0, -1.0, 0.5), R=2, n=3):
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, n_fft, "full", rms_target=10.0, seed=seed)
    u = render_multisine(spec, 1)
    y = simulate(WienerSurrogate(lin, initial_state=np.asarray(state)), u)
    U, Y = dft(u), dft(y)
    est = estimate_frf(U, Y, LpmConfig(R, n, spec.band_bins))
    g0 = lin.response(est.freq_hz)
    raw = Y.lines[est.bins] / U.lines[est.bins]
    return float(np.max(_rel_err(est.g_bla, g0))), float(np.max(_rel_err(raw, g0)))


def lpm_accuracy(art):
    lpm, raw = _transient_case(N)
    metrics = {"max_rel_err": lpm, "raw_rel_err": raw, "raw_over_lpm": raw / lpm}
    return metrics, {"N": N, "R": 2, "n": 3, "seed": 0, "initial_state": [1.0, -1.0, 0.5]}


LADDER = (2500, 5000, 10000, 20000)


def leakage_ladder(art):
    errs = [_transient_case(n)[0] for n in LADDER]
    steps = [errs[i + 1] / errs[i] for i in range(len(errs) - 1)]
    if art:
        _write_csv(art / "ladder.csv", ["N", "max_rel_err"], [(n, repr(e)) for n, e in zip(LADDER, errs)])
    metrics = {f"err_N{n}": e for n, e in zip(LADDER, errs)}
    metrics["max_step_ratio"] = max(steps)
    metrics["monotone"] = 1.0 if all(s < 1.0 for s in steps) else 0.0
    return metrics, {"ladder": list(LADDER), "R": 2, "n": 3, "seed": 0}


def variance_calibration(art, runs=500, sigma=0.05):
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, N, "full", rms_target=10.0, seed=0)
    u = render_multisine(spec, 1)
    U = dft(u)
    cfg = LpmConfig(2, 3, spec.band_bins)
    sys_ = WienerSurrogate(lin, noise_std=sigma, initial_state=np.array([1.0, -1.0, 0.5]))
    gs, gv, nv = [], [], []
    for s in range(runs):
        est = estimate_frf(U, dft(simulate(sys_, u, seed=s)), cfg)
        gs.append(est.g_bla)
        gv.append(est.g_var)
        nv.append(est.noise_var)
    ratio = np.var(np.asarray(gs), axis=0, ddof=1) / np.mean(gv, axis=0)
    within = (ratio <= 1.3) & (ratio >= 1 / 1.3)
    nv_ratio = float(np.mean(nv) / sigma**2)
    if art:
        _write_csv(art / "variance_ratio.csv", ["bin", "mc_var_over_mean_g_var"],
                   [(int(k), repr(float(r))) for k, r in zip(est.bins, ratio)])
    metrics = {
        "frac_bins_within_1_3": float(np.mean(within)),
        "median_var_ratio": float(np.median(ratio)),
        "noise_var_ratio": nv_ratio,
        "noise_var_ratio_err": abs(nv_ratio - 1.0),
    }
    return metrics, {"runs": runs, "noise_std": sigma, "R": 2, "n": 3}


def concat_correctness(art):
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, N, "full", rms_target=10.0, seed=0)
    fam = [WienerSurrogate(lin, initial_state=np.array(s)) for s in ([2.0, -1.0, 0.5], [-1.5, 2.0, 1.0])]
    camp = make_campaign(fam, spec, record_lengths=[5000, 3700], seed=0, redraw_phases=True)
    ds = camp.to_dataset()
    U = dft(np.concatenate([m.u.samples for m in camp.members]), FS)
    Y = dft(np.concatenate([m.y.samples for m in camp.members]), FS)
    k_lo = math.ceil(BAND[0] * ds.total_length / FS)
    k_hi = math.floor(BAND[1] * ds.total_length / FS)
    ccfg = ConcatConfig.default((k_lo, k_hi), 2, 2)
    est = estimate_frf_concat(ds, ccfg)
    blind = estimate_frf(U, Y, LpmConfig(2, ccfg.half_window_n, (k_lo, k_hi)))
    g0 = lin.response(est.freq_hz)
    e_cat = float(np.max(_rel_err(est.g_bla, g0)))
    e_blind = float(np.max(_rel_err(blind.g_bla, g0)))
    try:
        ConcatConfig(2, 3, (k_lo, k_hi)).validate(2)
        rejected = 0.0
    except ConcatConfigError as exc:
        rejected = 1.0 if "2n+1 >= (R+1)(1+N_c)" in str(exc) else 0.0
    metrics = {"concat_max_rel_err": e_cat, "blind_max_rel_err": e_blind,
               "blind_over_concat": e_blind / e_cat, "rejected_with_message": rejected}
    return metrics, {"lengths": [5000, 3700], "R": 2, "n": ccfg.half_window_n}


def concat_vs_single(art, runs=100, sigma=0.05, n=5):
    """Same window, same noise, same total length: one record versus two halves."""
    lin = default_linear_block(FS)
    n_tot = 2 * N
    spec = design_multisine(BAND, FS, n_tot, "full", rms_target=10.0, seed=0)
    u = render_multisine(spec, 1)
    U = dft(u)
    rng = np.random.default_rng(1)
    single, cat, larger = [], [], 0
    for s in range(runs):
        sys_ = WienerSurrogate(lin, noise_std=sigma, initial_state=rng.standard_normal(3))
        e1 = estimate_frf(U, dft(simulate(sys_, u, seed=s)), LpmConfig(2, n, spec.band_bins))
        parts = []
        for i in range(2):
            seg = u.samples[i * N:(i + 1) * N]
            si = WienerSurrogate(lin, noise_std=sigma, initial_state=rng.standard_normal(3))
            yi = simulate(si, SignalRecord(seg, FS, N, 1), seed=10_000 + 2 * s + i)
            parts.append((seg, yi.samples))
        e2 = estimate_frf_concat(ConcatDataset(parts, FS), ConcatConfig(2, n, spec.band_bins))
        single.append(float(np.mean(e1.g_var)))
        cat.append(float(np.mean(e2.g_var)))
        larger += cat[-1] > single[-1]
    metrics = {
        "mean_gvar_single": float(np.mean(single)),
        "mean_gvar_concat": float(np.mean(cat)),
        "gvar_ratio_concat_over_single": float(np.mean(cat) / np.mean(single)),
        "frac_runs_concat_larger": larger / runs,
    }
    return metrics, {"runs": runs, "noise_std": sigma, "R": 2, "n": n, "total_length": n_tot}


def averaged_vs_concat(art, n=7, seed=0):
    """Three records; members and the concatenation use the same half window."""
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, N, "full", rms_target=10.0, seed=0)
    ops = [OperatingPoint(soc, 25.0, 10.0) for soc in (20.0, 50.0, 80.0)]
    fam = [WienerSurrogate(lin, alpha3=0.05, noise_std=0.05, op_point=o) for o in ops]
    camp = make_campaign(fam, spec, n_periods=1, seed=seed, redraw_phases=True)
    ests = [estimate_frf(dft(m.u), dft(m.y), LpmConfig(2, n, spec.band_bins)) for m in camp.members]
    avg = average_blas(ests)
    m = len(ests)
    cfg = ConcatConfig(2, n, (m * spec.band_bins[0], m * spec.band_bins[1]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MixedOperatingPointsWarning)
        cat = restrict_to_grid(estimate_frf_concat(camp.to_dataset(), cfg), avg)
    diff = np.abs(cat.g_bla - avg.c_bla)
    pooled = np.sqrt(avg.variance + cat.g_var)
    if art:
        _write_csv(art / "compare.csv", ["bin", "abs_diff", "avg_var", "concat_var"],
                   [(int(k), repr(float(d)), repr(float(a)), repr(float(c)))
                    for k, d, a, c in zip(avg.bins, diff, avg.variance, cat.g_var)])
    metrics = {
        "mean_abs_diff": float(np.mean(diff)),
        "mean_pooled_std": float(np.mean(pooled)),
        "mean_diff_over_pooled_std": float(np.mean(diff) / np.mean(pooled)),
        "frac_bins_concat_var_ge_avg": float(np.mean(cat.g_var >= avg.variance)),
        "variance_ratio": float(np.mean(cat.g_var) / np.mean(avg.variance)),
    }
    return metrics, {"records": m, "R": 2, "n": n, "alpha3": 0.05, "noise_std": 0.05, "seed": seed}


def bla_oracle(art, alpha3=0.1, cs_realizations=500, lpm_realizations=200, n=5):
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, N, "full", rms_target=10.0, seed=0)
    sys_ = WienerSurrogate(lin, alpha3=alpha3)
    factor = bussgang_factor(sys_, spec)
    oracle = true_bla(sys_, spec)
    L = lin.response(spec.excited_freqs_hz)
    cs = cross_spectral_bla(sys_, spec, cs_realizations, seed=0)
    cs_factor = float(np.mean(np.abs(cs / L)))
    cs_rel = np.abs(cs) / np.abs(oracle) - 1
    rng = np.random.default_rng(0)
    members = []
    for i in range(lpm_realizations):
        u = render_multisine(spec.with_phases(1_000_000 + i), 1)
        s = WienerSurrogate(lin, alpha3=alpha3, initial_state=rng.standard_normal(3))
        members.append(estimate_frf(dft(u), dft(simulate(s, u)), LpmConfig(2, n, spec.band_bins)))
    avg = average_blas(members)
    rel = np.abs(avg.c_bla) / np.abs(oracle) - 1
    metrics = {
        "bussgang_factor": factor,
        "cross_spectral_factor": cs_factor,
        "cross_spectral_factor_rel_err": abs(cs_factor / factor - 1),
        "cross_spectral_rms_rel_err": float(np.sqrt(np.mean(cs_rel**2))),
        "lpm_rms_rel_mag_err": float(np.sqrt(np.mean(rel**2))),
        "lpm_max_rel_mag_err": float(np.max(np.abs(rel))),
        "lpm_mean_rel_mag_err": float(np.mean(rel)),
    }
    cfg = {"alpha3": alpha3, "cross_spectral_realizations": cs_realizations,
           "lpm_realizations": lpm_realizations, "R": 2, "n": n}
    return metrics, cfg


def distortion_selectivity(art, noise_std=0.01):
    lin = default_linear_block(FS)
    spec = design_multisine(BAND, FS, N, "odd_random", rms_target=10.0, seed=0)
    u = render_multisine(spec, 7)
    metrics = {}
    for tag, a2, a3 in (("a2", 0.1, 0.0), ("a3", 0.0, 0.1)):
        s = WienerSurrogate(lin, alpha2=a2, alpha3=a3, noise_std=noise_std, initial_state=np.ones(3))
        rep = analyze(period_spectra(simulate(s, u, seed=3), 1), spec)
        floor = rep.noise_floor.mean_power_db()
        metrics[f"{tag}_odd_excess_db"] = rep.odd_nl.mean_power_db() - floor
        metrics[f"{tag}_even_excess_db"] = rep.even_nl.mean_power_db() - floor
        metrics[f"{tag}_floor_db"] = floor
    return metrics, {"noise_std": noise_std, "periods": 7, "discard": 1, "alpha": 0.1}


def order_select_3(art, reps=100, rel_noise=0.01):
    lin = default_linear_block(FS)
    bins = np.arange(100, 501)
    f = bins * FS / N
    L = lin.response(f)
    sigma = rel_noise * np.abs(L)
    hits = 0
    counts: dict = {}
    for s in range(reps):
        rng = np.random.default_rng(s)
        e = sigma * (rng.standard_normal(L.size) + 1j * rng.standard_normal(L.size)) / np.sqrt(2)
        frf = SimpleNamespace(g_bla=L + e, freq_hz=f, variance=sigma**2, sample_rate_hz=FS)
        best = select_order(frf, [(k, k) for k in range(1, 6)]).best
        counts[best.order] = counts.get(best.order, 0) + 1
        hits += best.order == (3, 3)
    exact = SimpleNamespace(g_bla=L, freq_hz=f, variance=np.ones(L.size), sample_rate_hz=FS)
    m = fit_tf(exact, 3, 3, weighting="uniform")
    coef_err = float(max(np.max(np.abs(m.b - lin.b)), np.max(np.abs(m.a - lin.a))))
    metrics = {"frac_selected_3_3": hits / reps, "roundtrip_coef_err": coef_err}
    for (nb, na), c in sorted(counts.items()):
        metrics[f"selected_{nb}_{na}"] = c
    return metrics, {"reps": reps, "relative_noise": rel_noise, "orders": [1, 2, 3, 4, 5]}


DETERMINISM_PIPELINE = [
    ["design", "--grid", "full", "--out", "spec.json"],
    ["simulate", "--spec", "spec.json", "--alpha3", "0.05", "--noise-std", "0.01", "--out", "rec.csv"],
    ["estimate", "--in", "rec.csv", "--R", "2", "--n", "3", "--band", "1:5", "--out", "frf.csv"],
    ["fit", "--in", "frf.csv", "--orders", "1:4", "--out", "model.json"],
    ["plot", "--frf", "frf.csv", "--model", "model.json", "--out", "frf.svg"],
    ["design", "--grid", "odd_random", "--out", "odd.json"],
    ["simulate", "--spec", "odd.json", "--alpha3", "0.1", "--noise-std", "0.01", "--out", "odd.csv"],
    ["distortions", "--in", "odd.csv", "--spec", "odd.json", "--out", "dist.csv"],
    ["plot", "--dist", "dist.csv", "--out", "dist.svg"],
    ["simulate", "--spec", "spec.json", "--periods", "1", "--redraw-phases", "--noise-std", "0.01",
     "--op", "20:25", "--op", "50:25", "--out", "camp.csv"],
    ["estimate", "--in", "camp_0.csv", "--n", "7", "--out", "m0.csv"],
    ["estimate", "--in", "camp_1.csv", "--n", "7", "--out", "m1.csv"],
    ["average", "--in", "m0.csv", "--in", "m1.csv", "--out", "avg.csv"],
    ["estimate-concat", "--manifest", "camp.manifest.json", "--n", "7", "--out", "cat.csv"],
    ["compare", "--a", "avg.csv", "--b", "cat.csv", "--restrict", "--out", "cmp.csv"],
    ["plot", "--a", "avg.csv", "--b", "cat.csv", "--restrict", "--out", "cmp.svg"],
]


@contextlib.contextmanager
def _cwd(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def _run_pipeline(workdir) -> dict:
    from .cli import main

    with _cwd(workdir), open(os.devnull, "w") as sink, contextlib.redirect_stdout(sink):
        for argv in DETERMINISM_PIPELINE:
            code = main(argv)
            if code != 0:
                raise RuntimeError(f"pipeline step {' '.join(argv)} exited with {code}")
    return {p.name: p.read_bytes() for p in sorted(Path(workdir).iterdir()) if p.is_file()}


def determinism(art):
    with tempfile.TemporaryDirectory() as d1, tempfile.TemporaryDirectory() as d2:
        a, b = _run_pipeline(d1), _run_pipeline(d2)
    names = sorted(set(a) | set(b))
    bad = [n for n in names if a.get(n) != b.get(n)]
    if art:
        (art / "files.txt").write_text("".join(f"{n}\t{'same' if n not in bad else 'DIFF'}\n" for n in names))
    return {"n_files": len(names), "n_mismatched": len(bad)}, {"steps": len(DETERMINISM_PIPELINE)}


REGISTRY = {
    "averaged_vs_concat": averaged_vs_concat,
    "bla_oracle": bla_oracle,
    "concat_correctness": concat_correctness,
    "concat_vs_single": concat_vs_single,
    "design_arithmetic": design_arithmetic,
    "determinism": determinism,
    "distortion_selectivity": distortion_selectivity,
    "leakage_ladder": leakage_ladder,
    "lpm_accuracy": lpm_accuracy,
    "order_select_3": order_select_3,
    "variance_calibration": variance_calibration,
}


def scenario_ids() -> list[str]:
    return sorted(REGISTRY)


def run_scenario(scenario_id: str, artifacts=None, thresholds=None) -> ScenarioResult:
    """Run one registered scenario and judge it against the threshold table."""
    if scenario_id not in REGISTRY:
        raise UnknownScenarioError(f"unknown scenario {scenario_id!r}; known: {', '.join(scenario_ids())}")
    table = thresholds or load_thresholds()
    limits = table["scenarios"].get(scenario_id, {})
    art = None
    if artifacts is not None:
        art = Path(artifacts) / scenario_id
        art.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    metrics, config = REGISTRY[scenario_id](art)
    metrics = {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in metrics.items()}
    metrics["runtime_s"] = time.perf_counter() - t0
    config = dict(config, thresholds_version=table.get("version"))
    result = ScenarioResult(scenario_id, metrics, config, limits, evaluate(metrics, limits))
    if art is not None:
        (art / "result.json").write_text(json.dumps(
            {"scenario_id": scenario_id, "pass": result.passed, "metrics": metrics,
             "config": config, "failures": result.failures}, indent=2, sort_keys=True, default=str) + "\n")
    return result


REPORT_HEADER = ["scenario_id", "pass", "runtime_s", "metrics", "failures"]


def write_report(path, results):
    rows = []
    for r in sorted(results, key=lambda r: r.scenario_id):
        core = {k: v for k, v in r.metrics.items() if k != "runtime_s"}
        rows.append([r.scenario_id, "PASS" if r.passed else "FAIL", f"{r.runtime_s:.3f}",
                     json.dumps(core, sort_keys=True), "; ".join(r.failures)])
    _write_csv(path, REPORT_HEADER, rows)


def run_all(ids=None, report=None, artifacts=None) -> list[ScenarioResult]:
    table = load_thresholds()
    results = [run_scenario(i, artifacts, table) for i in sorted(ids or scenario_ids())]
    if report is not None:
        write_report(report, results)
    return results
