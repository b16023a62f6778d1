"""Command line interface: ``blalab <subcommand> [options]``.

Exit status is 0 on success, 2 for invalid input or configuration and 1 for
numerical failures. Every command that writes files also writes
``<output file name>.provenance.json``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as bio
from .aggregate import average_blas, compare_blas, restrict_to_grid
from .concat import ConcatConfig, ConcatDataset, MixedOperatingPointsWarning, estimate_frf_concat
from .distortion import analyze
from .fit import FitError, RationalModel, fit_tf, select_order
from .lpm import LpmConfig, LpmError, estimate_frf
from .signal import MultisineSpec, OperatingPoint, SignalRecord, band_to_bins, design_multisine
from .simulator import WienerSurrogate, default_linear_block, make_campaign
from .spectral import dft, period_average, period_spectra

log = logging.getLogger("blalab")

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2
SEED_ENV = "BLALAB_SEED"


class Invalid(ValueError):
    """User-facing validation failure (exit 2)."""


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LO:HI in Hz, got {text!r}") from None
    return lo, hi


def _orders(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"orders must look like 1:5 or 1,2,3, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _op(text: str) -> OperatingPoint:
    """``SOC:TEMP[:RMS[:LABEL]]``."""
    parts = text.split(":")
    try:
        soc, temp = float(parts[0]), float(parts[1])
        rms = float(parts[2]) if len(parts) > 2 and parts[2] else 0.0
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"operating point must look like SOC:TEMP[:RMS[:LABEL]], got {text!r}") from None
    return OperatingPoint(soc, temp, rms, parts[3] if len(parts) > 3 else "")


def _seed(args) -> tuple[int, str]:
    env = os.environ.get(SEED_ENV)
    if env is not None and env != "":
        try:
            return int(env), "env"
        except ValueError:
            raise Invalid(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return int(args.seed), "argv"


def _out(args) -> Path:
    p = Path(args.out)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _provenance(args, out, config, inputs=(), outputs=(), seed=None):
    bio.write_provenance(
        out, args.command, args.argv, config, seed, list(inputs), [str(o) for o in outputs], __version__
    )


def _load_spec(path) -> MultisineSpec:
    try:
        return MultisineSpec.from_dict(bio.load_json(path))
    except (KeyError, TypeError) as exc:
        raise Invalid(f"{path}: not a multisine design ({exc})") from None


# -- subcommands -----------------------------------------------------------

def cmd_design(args) -> int:
    seed, source = _seed(args)
    spec = design_multisine(args.band, args.fs, args.N, args.grid, args.group, args.rms, seed)
    out = _out(args)
    bio.dump_json(out, spec.to_dict())
    cfg = {"band_hz": list(args.band), "fs": args.fs, "N": args.N, "grid": args.grid,
           "group": args.group, "rms": args.rms, "seed_source": source}
    _provenance(args, out, cfg, outputs=[out], seed=seed)
    print(f"{out}: {spec.n_excited} excited lines, bins {spec.band_bins[0]}..{spec.band_bins[1]}, "
          f"resolution {spec.frequency_resolution_hz:g} Hz")
    return EXIT_OK


def _system(args, op: OperatingPoint) -> WienerSurrogate:
    lin = default_linear_block(args.fs_from_spec)
    if args.gain != 1.0:
        lin = RationalModel(b=lin.b * args.gain, a=lin.a, sample_rate_hz=lin.sample_rate_hz)
    state = None
    if args.initial_state is not None:
        state = np.asarray(args.initial_state, dtype=float)
    sys_ = WienerSurrogate(lin, args.alpha2, args.alpha3, args.noise_std, state, op, args.noise_pole)
    sys_.state()
    sys_.check_stable()
    return sys_


def cmd_simulate(args) -> int:
    seed, source = _seed(args)
    inputs = []
    if args.spec:
        spec = _load_spec(args.spec)
        inputs.append(args.spec)
    else:
        spec = design_multisine(args.band, args.fs, args.N, args.grid, 3, args.rms, seed)
    args.fs_from_spec = spec.sample_rate_hz
    ops = args.op or [OperatingPoint(rms_a=spec.rms_target)]
    ops = [o if o.rms_a else OperatingPoint(o.soc_pct, o.temperature_c, spec.rms_target, o.label) for o in ops]
    family = [_system(args, o) for o in ops]
    lengths = args.record_lengths
    if lengths is not None and len(lengths) != len(family):
        raise Invalid(f"--record-lengths has {len(lengths)} entries for {len(family)} operating points")
    camp = make_campaign(
        family, spec, n_periods=args.periods, record_lengths=lengths, seed=seed,
        redraw_phases=args.redraw_phases, initial_state_scale=args.state_scale,
    )
    out = _out(args)
    written = []
    if len(camp) == 1:
        bio.write_record(out, camp.members[0].u, camp.members[0].y)
        written = [out]
    else:
        for i, m in enumerate(camp.members):
            p = out.with_name(f"{out.stem}_{i}{out.suffix or '.csv'}")
            bio.write_record(p, m.u, m.y)
            written.append(p)
        bio.dump_json(out.with_name(out.stem + ".manifest.json"), {
            "kind": "campaign",
            "records": [p.name for p in written],
            "operating_points": [m.system.op_point.to_dict() for m in camp.members],
            "seed": seed,
        })
    cfg = {
        "alpha2": args.alpha2, "alpha3": args.alpha3, "noise_std": args.noise_std, "gain": args.gain,
        "noise_pole": args.noise_pole, "periods": args.periods, "record_lengths": lengths,
        "redraw_phases": args.redraw_phases, "state_scale": args.state_scale,
        "initial_state": args.initial_state, "seed_source": source,
        "spec": None if args.spec else spec.to_dict(),
    }
    _provenance(args, out, cfg, inputs, written, seed)
    print(f"wrote {len(written)} record(s)")
    return EXIT_OK


def _record_spectra(u: SignalRecord, y: SignalRecord, discard: int, frame: str):
    """Input/output spectra of one record as used by ``estimate``."""
    if frame == "full" or u.n_periods == 1:
        return dft(u), dft(y), u.samples.size
    if discard >= u.n_periods:
        raise Invalid(f"cannot discard {discard} of {u.n_periods} periods")
    us, ys = period_spectra(u, discard), period_spectra(y, discard)
    if len(us) == 1:
        return us[0], ys[0], u.samples_per_period
    return period_average(us)[0], period_average(ys)[0], u.samples_per_period


def cmd_estimate(args) -> int:
    u, y = bio.read_record(args.input)
    U, Y, n_fft = _record_spectra(u, y, args.discard, args.frame)
    band = band_to_bins(args.band, u.sample_rate_hz, n_fft)
    n = args.n if args.n is not None else args.R + 1
    cfg = LpmConfig(args.R, n, band)
    est = estimate_frf(U, Y, cfg)
    out = _out(args)
    bio.write_frf(out, est)
    _provenance(args, out, dict(cfg.to_dict(), discard=args.discard, frame=args.frame),
                [args.input], [out])
    print(f"{out}: {len(est)} bins")
    return EXIT_OK


def _concat_inputs(args) -> list[Path]:
    paths = [Path(p) for p in (args.input or [])]
    if args.manifest:
        man = bio.load_json(args.manifest)
        base = Path(args.manifest).parent
        paths += [base / r for r in man.get("records", [])]
    if len(paths) < 1:
        raise Invalid("estimate-concat needs --in records or a --manifest")
    return paths


def cmd_estimate_concat(args) -> int:
    paths = _concat_inputs(args)
    n_sub = len(paths)
    R = args.R
    probe = ConcatConfig.default((1, 1), n_sub, R)
    n = args.n if args.n is not None else probe.half_window_n
    # inequality checked before any file is parsed
    ConcatConfig(R, n, (1, 1), not args.no_noise_var).validate(n_sub)
    subs = []
    fs = None
    for p in paths:
        u, y = bio.read_record(p)
        if fs is not None and u.sample_rate_hz != fs:
            raise Invalid(f"{p}: sample rate {u.sample_rate_hz} differs from {fs}")
        fs = u.sample_rate_hz
        subs.append((u.samples, y.samples, u.metadata))
    ds = ConcatDataset(subs, fs)
    band = band_to_bins(args.band, fs, ds.total_length)
    cfg = ConcatConfig(R, n, band, not args.no_noise_var)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MixedOperatingPointsWarning)
        est = estimate_frf_concat(ds, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out(args)
    bio.write_frf(out, est)
    outputs = [out] + ([bio.transients_path(out)] if n_sub > 1 else [])
    _provenance(args, out, cfg.to_dict(), paths, outputs)
    print(f"{out}: {len(est)} bins on a {ds.total_length}-point grid, {n_sub} sub-records")
    return EXIT_OK


def cmd_average(args) -> int:
    ests = [bio.read_frf(p) for p in args.input]
    c = average_blas(ests)
    out = _out(args)
    bio.write_common(out, c)
    _provenance(args, out, {"m": len(ests)}, args.input, [out])
    print(f"{out}: common BLA of {c.m_experiments} estimates over {len(c)} bins")
    return EXIT_OK


def cmd_distortions(args) -> int:
    spec = _load_spec(args.spec)
    u, y = bio.read_record(args.input)
    if u.samples_per_period != spec.samples_per_period:
        raise Invalid("record period length does not match the multisine design")
    rep = analyze(period_spectra(y, args.discard), spec)
    out = _out(args)
    bio.write_distortion(out, rep)
    _provenance(args, out, {"discard": args.discard}, [args.input, args.spec], [out])
    summary = ", ".join(f"{k} {v.mean_power_db():.1f} dB" for k, v in rep.classes().items())
    print(f"{out}: {summary}")
    return EXIT_OK


def cmd_fit(args) -> int:
    est = bio.read_estimate(args.input)
    out = _out(args)
    if args.nb is not None or args.na is not None:
        if args.nb is None or args.na is None:
            raise Invalid("--nb and --na must be given together")
        model = fit_tf(est, args.nb, args.na, weighting=args.weighting)
        table = []
    else:
        sel = select_order(est, [(k, k) for k in args.orders], weighting=args.weighting)
        model, table = sel.best, sel.table
    bio.dump_json(out, model.to_dict())
    stem = out.with_suffix("")
    f = np.asarray(est.freq_hz)
    gm = model.response(f)
    overlay = stem.with_name(stem.name + ".overlay.csv")
    bio.write_table(overlay, ["bin", "freq_hz", "meas_re", "meas_im", "model_re", "model_im"],
                    zip(np.asarray(est.bins, dtype=int), f, est.g_bla.real, est.g_bla.imag, gm.real, gm.imag))
    outputs = [out, overlay]
    if table:
        tpath = stem.with_name(stem.name + ".orders.csv")
        bio.write_table(tpath, ["n_b", "n_a", "cost", "mdl", "error"],
                        [(r.n_b, r.n_a, float(r.cost), float(r.mdl), r.error or "") for r in table])
        outputs.append(tpath)
    cfg = {"weighting": args.weighting, "orders": args.orders, "nb": args.nb, "na": args.na}
    _provenance(args, out, cfg, [args.input], outputs)
    print(f"{out}: order {model.order}, cost {model.cost:.6g}")
    return EXIT_OK


def _align(a, b, restrict: bool):
    if a.n_fft == b.n_fft or not restrict:
        return a, b
    if b.n_fft > a.n_fft:
        return a, restrict_to_grid(b, a)
    return restrict_to_grid(a, b), b


def cmd_compare(args) -> int:
    a, b = bio.read_estimate(args.a), bio.read_estimate(args.b)
    a, b = _align(a, b, args.restrict)
    cmp = compare_blas(a, b)
    out = _out(args)
    bio.write_table(out, ["bin", "freq_hz", "diff_re", "diff_im", "var_a", "var_b", "pooled_std"],
                    zip(np.asarray(cmp.bins, dtype=int), cmp.freq_hz, cmp.diff.real, cmp.diff.imag,
                        cmp.var_a, cmp.var_b, cmp.pooled_std))
    bio.dump_json(bio.sidecar(out), {"kind": "comparison", "summary": bio._jsonable(cmp.summary())})
    _provenance(args, out, {"restrict": args.restrict}, [args.a, args.b], [out, bio.sidecar(out)])
    s = cmp.summary()
    print(f"{out}: max gap {s['max_db_gap']:.3g} dB, variance ratio {s['variance_ratio']:.3g}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plots

    out = _out(args)
    model = RationalModel.from_dict(bio.load_json(args.model)) if args.model else None
    inputs = [p for p in (args.model,) if p]
    if args.frf:
        est = bio.read_estimate(args.frf)
        plots.plot_frf(est, out, model)
        inputs.append(args.frf)
        kind = "frf"
    elif args.dist:
        levels = bio.read_distortion(args.dist)
        meta = bio.load_json(bio.sidecar(args.dist))
        plots.plot_distortion(levels, float(meta["sample_rate_hz"]), int(meta["n_fft"]), out)
        inputs.append(args.dist)
        kind = "distortion"
    elif args.a and args.b:
        a, b = _align(bio.read_estimate(args.a), bio.read_estimate(args.b), args.restrict)
        if not (a.n_fft == b.n_fft and np.array_equal(a.bins, b.bins)):
            raise Invalid("estimates do not share the same bin grid (use --restrict)")
        plots.plot_compare(a, b, out, model)
        inputs += [args.a, args.b]
        kind = "compare"
    else:
        raise Invalid("plot needs --frf, --dist, or both --a and --b")
    _provenance(args, out, {"kind": kind, "restrict": args.restrict}, inputs,
                [out, plots.companion_csv(out)])
    print(f"{out}: {kind} plot")
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import bench

    if args.bench_command == "list":
        for sid in bench.scenario_ids():
            print(sid)
        return EXIT_OK
    ids = bench.scenario_ids() if args.all else (args.id or [])
    if not ids:
        raise Invalid("bench run needs --all or at least one --id")
    out = _out(args)
    artifacts = Path(args.artifacts) if args.artifacts else out.parent / (out.stem + "_artifacts")
    results = bench.run_all(ids, report=out, artifacts=artifacts)
    for r in results:
        print(f"{r.scenario_id:28s} {'PASS' if r.passed else 'FAIL'}")
    _provenance(args, out, {"scenarios": ids}, [], [out])
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blalab", description="BLA estimation toolkit")
    p.add_argument("--version", action="version", version=f"blalab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def grid_opts(sp, grid_default="full"):
        sp.add_argument("--band", type=_band, default=(1.0, 5.0), help="band LO:HI in Hz (default 1:5)")
        sp.add_argument("--fs", type=float, default=50.0, help="sample rate in Hz (default 50)")
        sp.add_argument("--N", type=int, default=5000, help="samples per period (default 5000)")
        sp.add_argument("--grid", choices=("full", "odd", "odd_random"), default=grid_default)
        sp.add_argument("--rms", type=float, default=10.0, help="RMS of the excitation (default 10)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("design", help="design a multisine and write its JSON description")
    grid_opts(sp)
    sp.add_argument("--group", type=int, default=3, help="odd lines per detection group")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("simulate", help="simulate the Wiener surrogate driven by a multisine")
    sp.add_argument("--spec", help="multisine JSON (default: design one from the grid options)")
    grid_opts(sp)
    sp.add_argument("--periods", type=int, default=7)
    sp.add_argument("--alpha2", type=float, default=0.0)
    sp.add_argument("--alpha3", type=float, default=0.0)
    sp.add_argument("--noise-std", type=float, default=0.0)
    sp.add_argument("--noise-pole", type=float, default=None, help="first-order noise colouring pole")
    sp.add_argument("--gain", type=float, default=1.0, help="scale of the linear block")
    sp.add_argument("--initial-state", type=_floats, default=None, help="filter state, comma separated")
    sp.add_argument("--state-scale", type=float, default=1.0, help="std of random initial states")
    sp.add_argument("--op", type=_op, action="append", help="SOC:TEMP[:RMS[:LABEL]], repeat for a campaign")
    sp.add_argument("--record-lengths", type=lambda s: [int(v) for v in s.split(",")], default=None)
    sp.add_argument("--redraw-phases", action="store_true", help="new phase realization per record")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="SISO LPM estimate from one record")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--R", type=int, default=2)
    sp.add_argument("--n", type=int, default=None, help="half window (default R+1)")
    sp.add_argument("--band", type=_band, default=(1.0, 5.0))
    sp.add_argument("--discard", type=int, default=1, help="leading periods to drop")
    sp.add_argument("--frame", choices=("average", "full"), default="average",
                    help="average steady-state periods or transform the whole record")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("estimate-concat", help="common BLA from concatenated records")
    sp.add_argument("--in", dest="input", action="append")
    sp.add_argument("--manifest")
    sp.add_argument("--R", type=int, default=2)
    sp.add_argument("--n", type=int, default=None, help="half window (default: smallest valid)")
    sp.add_argument("--band", type=_band, default=(1.0, 5.0))
    sp.add_argument("--no-noise-var", action="store_true", help="allow 2n+1 == (R+1)(1+N_c)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_estimate_concat)

    sp = sub.add_parser("average", help="average FRF estimates into a common BLA")
    sp.add_argument("--in", dest="input", action="append", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_average)

    sp = sub.add_parser("distortions", help="odd/even distortion levels from detection lines")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--discard", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_distortions)

    sp = sub.add_parser("fit", help="fit a rational model, selecting the order by MDL")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--orders", type=_orders, default=list(range(1, 6)), help="e.g. 1:5 (n_b = n_a)")
    sp.add_argument("--nb", type=int, default=None)
    sp.add_argument("--na", type=int, default=None)
    sp.add_argument("--weighting", choices=("variance", "uniform"), default="variance")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("compare", help="compare two BLA estimates")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--restrict", action="store_true", help="pick the finer grid's lines on the coarser grid")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("plot", help="SVG plot with a companion CSV")
    sp.add_argument("--frf")
    sp.add_argument("--dist")
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--model")
    sp.add_argument("--restrict", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("bench", help="acceptance and benchmark scenarios")
    bsub = sp.add_subparsers(dest="bench_command", required=True)
    run = bsub.add_parser("run")
    run.add_argument("--all", action="store_true")
    run.add_argument("--id", action="append")
    run.add_argument("--out", default="bench_report.csv")
    run.add_argument("--artifacts", default=None)
    bsub.add_parser("list")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LpmError, FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
