"""Command-line entry point: ``metric-freedom <command> [flags]``.

Every command writes its outputs into ``--output-dir`` atomically and prints a
short summary. Outputs carry a header with tool version, seed and the SHA-256
of the input bytes; nothing time-dependent is recorded, so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path

from . import __version__
from .distance import DistanceKind, DistanceSpec
from .errors import (
    ConfigError,
    DegenerateError,
    FreedomError,
    GridUnderfull,
    InputError,
    NoMixedQuestions,
    NTooSmall,
)
from .freedom import Aggregation, per_dataset_freedom, per_question_freedom
from .lift import least_squares_line, lift_table_csv, load_lift_inputs, pearson_r, permutation_p
from .records import group_by_question, parse_run_records, validate_run_set
from .resample import BootstrapConfig, bootstrap_freedom, budget_sweep, sweep_to_csv
from .simlab import (
    IteratorConfig,
    LandscapeConfig,
    landscape_csv,
    landscape_grid,
    simulate_iterator,
    trajectories_csv,
)
from .svg import heatmap_svg, scatter_svg
from .theory import PhaseParams, convergence_condition, critical_freedom

log = logging.getLogger("metric_freedom")

EXIT_OK, EXIT_INPUT, EXIT_NO_MIXED, EXIT_GRID, EXIT_DEGENERATE = 0, 2, 3, 4, 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, NoMixedQuestions):
        return EXIT_NO_MIXED
    if isinstance(exc, GridUnderfull):
        return EXIT_GRID
    if isinstance(exc, (InputError, ConfigError, OSError, ValueError)):
        return EXIT_INPUT
    if isinstance(exc, (DegenerateError, NTooSmall)):
        return EXIT_DEGENERATE
    if isinstance(exc, FreedomError):
        return EXIT_DEGENERATE
    return 1


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(args, input_bytes: bytes | None) -> dict:
    return {
        "tool": "metric-freedom",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "input_sha256": None if input_bytes is None else hashlib.sha256(input_bytes).hexdigest(),
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_header(h: dict) -> str:
    return "".join(f"# {k}={'' if v is None else v}\n" for k, v in h.items())


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _read_input(path: str) -> bytes:
    return Path(path).read_bytes()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# compute-freedom

def cmd_compute_freedom(args) -> int:
    raw = _read_input(args.input)
    runs = validate_run_set(parse_run_records(raw, source=args.input))
    spec = DistanceSpec(DistanceKind(args.distance), args.alpha)
    agg = Aggregation(args.aggregation)
    results, codes = [], []
    for ds in runs.datasets():
        recs = runs.for_dataset(ds)
        entry = {"dataset_id": ds}
        try:
            if agg is Aggregation.PER_QUESTION_MEDIAN:
                data = group_by_question(recs)
                est = per_question_freedom(data, spec)
            else:
                data = recs
                est = per_dataset_freedom(recs, spec)
            if args.bootstrap:
                est = bootstrap_freedom(data, spec, BootstrapConfig(args.bootstrap, args.seed))
            entry.update(status="OK", **est.to_json())
            if est.questions_excluded:
                log.warning("%s: %d question(s) excluded (not mixed or degenerate)",
                            ds, est.questions_excluded)
        except (NoMixedQuestions, DegenerateError, NTooSmall) as exc:
            entry.update(status=exc.code, message=str(exc))
            codes.append(exit_code_for(exc))
            log.warning("%s excluded: %s", ds, exc)
        results.append(entry)

    header = _header(args, raw)
    out = Path(args.output_dir)
    if args.format == "json":
        write_atomic(out / "freedom.json", _dumps({"header": header, "results": results}))
    else:
        cols = ["dataset_id", "status", "F", "r_M", "sigma_F", "ci_low", "ci_high", "n_runs",
                "n_pairs", "aggregation", "questions_used", "questions_excluded"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for e in results:
            w.writerow([_fmt(e.get(c)) for c in cols])
        write_atomic(out / "freedom.csv", _csv_header(header) + buf.getvalue())
    for e in results:
        if e["status"] == "OK":
            print(f"{e['dataset_id']}: F = {e['F']:.4f} (r_M = {e['r_M']:.4f})")
        else:
            print(f"{e['dataset_id']}: {e['status']}: {e['message']}")
    if all(e["status"] != "OK" for e in results):
        return EXIT_NO_MIXED if EXIT_NO_MIXED in codes else max(codes, default=EXIT_DEGENERATE)
    return EXIT_OK


# sweep

def cmd_sweep(args) -> int:
    raw = _read_input(args.input)
    runs = validate_run_set(parse_run_records(raw, source=args.input))
    spec = DistanceSpec(DistanceKind(args.distance), args.alpha)
    cells = budget_sweep(
        list(runs), spec, args.M_list, args.N_list, args.cost_per_run,
        trials=args.trials, seed=args.seed,
    )
    header = _header(args, raw)
    out = Path(args.output_dir)
    if args.format == "json":
        rows = [c.row() for c in cells]
        write_atomic(out / "sweep.json", _dumps({"header": header, "cells": rows}))
    else:
        write_atomic(out / "sweep.csv", _csv_header(header) + sweep_to_csv(cells))
    values = {(c.M, c.N): c.F_hat for c in cells}
    op = tuple(args.operating_point) if args.operating_point else None
    write_atomic(out / "sweep.svg", heatmap_svg(args.M_list, args.N_list, values, op))
    for c in cells:
        if op and (c.M, c.N) == op:
            print(f"operating point M={c.M} N={c.N}: F_hat={_fmt(c.F_hat)} cost={c.cost:.10g}")
    print(f"{len(cells)} cells written")
    return EXIT_OK


# lift-correlate

def cmd_lift_correlate(args) -> int:
    raw = _read_input(args.table)
    rows = load_lift_inputs(args.table)
    header = _header(args, raw)
    out = Path(args.output_dir)
    stats = {"n": len(rows), "pearson_r": None, "permutation_p": None,
             "slope": None, "intercept": None, "n_perm": args.n_perm}
    code = EXIT_OK
    err = None
    F = [r.F for r in rows]
    L = [r.lift_norm for r in rows]
    if len(rows) < 3:
        log.warning("correlation needs at least 3 rows, got %d; emitting table only", len(rows))
    else:
        try:
            stats["pearson_r"] = pearson_r(F, L)
            stats["permutation_p"] = permutation_p(F, L, args.n_perm, args.seed)
            stats["slope"], stats["intercept"] = least_squares_line(F, L)
        except DegenerateError as exc:
            err, code = exc, exit_code_for(exc)
    if args.format == "json":
        doc = {"header": header, "rows": [r.to_json() for r in rows], "correlation": stats}
        write_atomic(out / "lift.json", _dumps(doc))
    else:
        write_atomic(out / "lift_table.csv", _csv_header(header) + lift_table_csv(rows))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stat", "value"])
        for k in sorted(stats):
            w.writerow([k, _fmt(stats[k])])
        write_atomic(out / "lift_stats.csv", _csv_header(header) + buf.getvalue())
    if rows:
        line = None if stats["slope"] is None else (stats["slope"], stats["intercept"])
        title = "" if stats["pearson_r"] is None else (
            f"r = {stats['pearson_r']:.3f}, p = {stats['permutation_p']:.4f}")
        write_atomic(out / "lift_scatter.svg", scatter_svg(F, L, line, title=title))
    if err is not None:
        print(f"error: {err}", file=sys.stderr)
    elif stats["pearson_r"] is not None:
        print(f"n = {len(rows)}  r = {stats['pearson_r']:.4f}  p = {stats['permutation_p']:.4g}")
    return code


# sim-landscape

def cmd_sim_landscape(args) -> int:
    cfg = LandscapeConfig(
        L0=args.L0, beta=args.L0, k=args.k, W=args.W, n_runs=args.n_runs,
        n_eval=args.n_eval, seed=args.seed, literal_supports=args.literal_supports,
    )
    grid = landscape_grid(args.target_F, cfg, enforce_min_k=not args.no_min_k)
    header = _header(args, None)
    out = Path(args.output_dir)
    if args.format == "json":
        cells = [{"target_F": t, "calibrated_F": cal.F, **r.__dict__} for t, cal, r in grid]
        write_atomic(out / "landscape.json", _dumps({"header": header, "cells": cells}))
    else:
        write_atomic(out / "landscape.csv", _csv_header(header) + landscape_csv(grid))
    for t, _, r in grid:
        print(f"target F={t:g}: beta={r.beta:.4g} k={r.k} F_hat={r.F_hat:.4f} "
              f"lift={r.lift_hat:.4f} bounds=[{r.lower_bound:.4f}, {r.upper_bound_appendix:.4f}] "
              f"within={str(r.within_bounds).lower()}")
    return EXIT_OK


# sim-iterator

def cmd_sim_iterator(args) -> int:
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    base = IteratorConfig(
        n_population=args.n, lam=args.lam, rho=args.rho, gamma=args.gamma,
        D_max=args.Dmax, T=args.T,
    )
    seeds = list(range(args.seeds))
    trajs = [simulate_iterator(IteratorConfig(**{**base.__dict__, "seed": (args.seed, s)}))
             for s in seeds]
    counts = Counter(t.classification.value for t in trajs)
    params = PhaseParams(p_min=base.p_min, gamma=args.gamma, rho=args.rho, D_max=args.Dmax, C=args.L0)
    summary = {
        "counts": {k: counts.get(k, 0) for k in ("CONVERGED", "PLATEAU", "OSCILLATED", "BUDGET")},
        "critical_freedom": critical_freedom(params),
        "convergence_condition": convergence_condition(params, args.lam),
        "seeds": args.seeds,
    }
    header = _header(args, None)
    out = Path(args.output_dir)
    if args.format == "json":
        doc = {
            "header": header,
            "summary": summary,
            "trajectories": [
                {"seed": s, "classification": t.classification.value,
                 "first_decrease": t.first_decrease, "S": list(t.scores)}
                for s, t in zip(seeds, trajs)
            ],
        }
        write_atomic(out / "iterator.json", _dumps(doc))
    else:
        write_atomic(out / "trajectories.csv", _csv_header(header) + trajectories_csv(trajs, seeds))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "classification", "first_decrease", "steps"])
        for s, t in zip(seeds, trajs):
            w.writerow([s, t.classification.value, _fmt(t.first_decrease), len(t.scores) - 1])
        write_atomic(out / "iterator_summary.csv", _csv_header(header) + buf.getvalue())
    print(" ".join(f"{k}={v}" for k, v in summary["counts"].items()))
    print(f"critical_freedom={summary['critical_freedom']:.6g} "
          f"convergence_condition={str(summary['convergence_condition']).lower()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--output-dir", default=".")
    common.add_argument("--format", choices=["csv", "json"], default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="metric-freedom")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute-freedom", parents=[common], help="F per dataset")
    c.add_argument("--input", required=True)
    c.add_argument("--distance", default="indicator",
                   choices=["jaccard", "indicator", "token-jaccard", "cosine"])
    c.add_argument("--aggregation", default="question-median",
                   choices=["dataset", "question-median"])
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--bootstrap", type=int, default=0, metavar="B")
    c.set_defaults(func=cmd_compute_freedom)

    s = sub.add_parser("sweep", parents=[common], help="(M, N) budget sweep")
    s.add_argument("--input", required=True)
    s.add_argument("--M-list", dest="M_list", type=_int_list, required=True)
    s.add_argument("--N-list", dest="N_list", type=_int_list, required=True)
    s.add_argument("--cost-per-run", type=float, required=True)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--distance", default="indicator",
                   choices=["jaccard", "indicator", "token-jaccard", "cosine"])
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--operating-point", type=_int_list, default=[6, 6], metavar="M,N")
    s.set_defaults(func=cmd_sweep)

    lc = sub.add_parser("lift-correlate", parents=[common], help="F vs lift_norm")
    lc.add_argument("--table", required=True)
    lc.add_argument("--n-perm", type=int, default=9999)
    lc.set_defaults(func=cmd_lift_correlate)

    sl = sub.add_parser("sim-landscape", parents=[common], help="extremal landscape grid")
    sl.add_argument("--target-F", dest="target_F", type=_float_list, default=[0.0, 0.25, 0.5, 0.75])
    sl.add_argument("--L0", type=float, default=1.0)
    sl.add_argument("--k", type=int, default=64)
    sl.add_argument("--W", type=float, default=0.2)
    sl.add_argument("--n-runs", type=int, default=200)
    sl.add_argument("--n-eval", type=int, default=50_000)
    sl.add_argument("--literal-supports", action="store_true")
    sl.add_argument("--no-min-k", action="store_true",
                    help="evaluate at --k instead of raising k to 4 L0/(beta W^2)")
    sl.set_defaults(func=cmd_sim_landscape)

    si = sub.add_parser("sim-iterator", parents=[common], help="greedy-fix trajectories")
    si.add_argument("--lambda", dest="lam", type=float, required=True)
    si.add_argument("--rho", type=float, default=0.5)
    si.add_argument("--gamma", type=float, default=0.2)
    si.add_argument("--Dmax", type=float, default=0.5)
    si.add_argument("--n", type=int, default=10)
    si.add_argument("--T", type=int, default=200)
    si.add_argument("--seeds", type=int, default=100)
    si.add_argument("--L0", type=float, default=1.0)
    si.set_defaults(func=cmd_sim_iterator)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (FreedomError, OSError, ValueError) as exc:
        code = exit_code_for(exc)
        tag = getattr(exc, "code", type(exc).__name__)
        print(f"error [{tag}]: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
