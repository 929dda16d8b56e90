"""Command-line interface.

Exit status is 0 on success, 1 on a numerical/runtime failure and 2 on invalid usage
or input. Summary lines on stdout start with ``#``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import ExperimentGrid, loading_magnitude, run_grid, summarize, write_results
from .bindata import (
    DataFormatError,
    SimulationDesign,
    load_csv,
    load_labels,
    simulate,
    write_csv,
    write_labels,
)
from .evaluate import adjusted_rand_index, support_recovery
from .fit import FitConfig, FitReport, fit_multistart, select_lambda
from .model import load_params, save_params
from .scores import estimate_scores

log = logging.getLogger("clusbird")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fit_config(args, lam: float = 0.0) -> FitConfig:
    return FitConfig(k=args.k, l=args.l, lam=lam, n_starts=args.starts, seed=args.seed,
                     max_outer_iters=args.max_iter, outer_tol=args.tol, threads=args.threads)


def _write_matrix(path: Path, mat: np.ndarray, header: list[str] | None = None,
                  extra: np.ndarray | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        for i, row in enumerate(mat):
            vals = [repr(float(v)) for v in row]
            if extra is not None:
                vals.append(int(extra[i]))
            writer.writerow(vals)


def _write_plot_data(path: Path, report: FitReport) -> None:
    f, a = report.params.f, report.params.a
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index"] + [f"comp{j + 1}" for j in range(f.shape[1])])
        for k, row in enumerate(f, start=1):
            writer.writerow(["centroid", k] + [repr(float(v)) for v in row])
        for d, row in enumerate(a, start=1):
            writer.writerow(["loading", d] + [repr(float(v)) for v in row])


def _write_fit_outputs(out: Path, report: FitReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_params(out / "model.json", report.params, lam=report.lam, loglik=report.loglik, bic=report.bic)
    _write_matrix(out / "responsibilities.csv", report.responsibilities)
    write_labels(report.hard_labels, out / "labels.txt")
    _write_plot_data(out / "plot_data.csv", report)


def _print_report(report: FitReport) -> None:
    print(f"# lambda {report.lam:.6g}")
    print(f"# loglik {report.loglik:.6f}")
    print(f"# penalized {report.penalized:.6f}")
    print(f"# bic {report.bic:.6f}")
    print(f"# nonzeros {report.nonzeros}")
    print(f"# iterations {report.n_iter} converged {report.converged}")


def cmd_simulate(args) -> int:
    c = args.c if args.c is not None else loading_magnitude(args.d)
    design = SimulationDesign(n=args.n, d=args.d, k=args.k, l=args.l, m=args.m, c=c,
                              seed=args.seed)
    sample = simulate(design)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(sample.data, out / "data.csv")
    write_labels(sample.true_labels, out / "labels.txt")
    save_params(out / "true_params.json", sample.true_params)
    print(f"# wrote {sample.data.n_rows}x{sample.data.n_cols} data to {out}")
    return 0


def cmd_fit(args) -> int:
    data = load_csv(args.data, has_header=args.header)
    if args.auto_lambda or args.grid:
        sel = select_lambda(data, _fit_config(args), args.grid)
        report = sel.report
    else:
        report = fit_multistart(data, _fit_config(args, args.lam))
    _write_fit_outputs(Path(args.out), report)
    _print_report(report)
    return 0


def cmd_select(args) -> int:
    data = load_csv(args.data, has_header=args.header)
    sel = select_lambda(data, _fit_config(args), args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bic_table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "loglik", "df", "bic", "nonzeros"])
        for row in sel.table:
            writer.writerow([repr(row.lam), repr(row.loglik), row.df, repr(row.bic), row.nonzeros])
    save_params(out / "model.json", sel.report.params, lam=sel.best_lambda,
                loglik=sel.report.loglik, bic=sel.report.bic)
    print(f"# selected lambda {sel.best_lambda:.6g} of {len(sel.table)}")
    _print_report(sel.report)
    return 0


def cmd_scores(args) -> int:
    data = load_csv(args.data, has_header=args.header)
    params, _ = load_params(args.model)
    if params.d != data.n_cols:
        raise UsageError(f"model has D={params.d} but data has {data.n_cols} columns")
    g = estimate_scores(data, params)
    labels = None
    if args.labels:
        labels = load_labels(args.labels)
        if labels.size != data.n_rows:
            raise UsageError("labels file length does not match the data")
    header = [f"score{j + 1}" for j in range(g.shape[1])] + (["label"] if labels is not None else [])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_matrix(out, g, header=header, extra=labels)
    print(f"# wrote {g.shape[0]}x{g.shape[1]} scores to {out}")
    return 0


def cmd_eval(args) -> int:
    a = load_labels(args.labels_a)
    b = load_labels(args.labels_b)
    if a.size != b.size:
        raise UsageError(f"label files have different lengths ({a.size} vs {b.size})")
    print(f"{adjusted_rand_index(a, b):.6f}")
    if args.true_model and args.model:
        true_params, _ = load_params(args.true_model)
        est_params, _ = load_params(args.model)
        zero_rate, nonzero_rate = support_recovery(true_params.a, est_params.a)
        print(f"# zero_rate {zero_rate:.6f}")
        print(f"# nonzero_rate {nonzero_rate:.6f}")
    return 0


def cmd_bench(args) -> int:
    d_values = list(args.d)
    if args.include_d1000 and 1000 not in d_values:
        d_values.append(1000)
    grid = ExperimentGrid(n_values=tuple(args.n), d_values=tuple(d_values), m_values=tuple(args.m),
                          replications=args.reps, starts=args.starts, seed=args.seed,
                          k=args.k, l=args.l)
    cfg = FitConfig(k=args.k, l=args.l, lam=args.lam, max_outer_iters=args.max_iter,
                    outer_tol=args.tol, threads=args.threads)
    rows = run_grid(grid, cfg, tune=args.tune, lambda_grid=args.grid)
    write_results(rows, args.out)
    for (n, d, m), s in summarize(rows).items():
        print(f"# n={n} d={d} m={m:g} ari min={s['min']:.3f} q1={s['q1']:.3f} "
              f"median={s['median']:.3f} q3={s['q3']:.3f} max={s['max']:.3f}")
    return 0


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="0/1 CSV file")
    p.add_argument("--header", action="store_true", help="skip the first line of the data file")
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument("--l", type=int, required=True, help="subspace dimension (<= k)")
    p.add_argument("--starts", type=int, default=50, help="random starts (default 50)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=500, help="outer EM iteration cap")
    p.add_argument("--tol", type=float, default=1e-7, help="relative convergence tolerance")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--grid", type=_floats, default=None, help="lambda values, e.g. 0,0.01,0.1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusbird", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--m", type=float, default=1.0, help="proportion of informative variables")
    p.add_argument("--c", type=float, default=None, help="loading magnitude (default from d)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model at one lambda (or select it)")
    _add_fit_options(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--auto-lambda", action="store_true", help="choose lambda by BIC")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="choose lambda by BIC over a grid")
    _add_fit_options(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("scores", help="estimate individual component scores")
    p.add_argument("--data", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--model", required=True, help="fitted model JSON")
    p.add_argument("--labels", default=None, help="optional labels to append as a column")
    p.add_argument("--out", required=True, help="scores CSV path")
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("eval", help="adjusted Rand index between two label files")
    p.add_argument("--labels-a", required=True)
    p.add_argument("--labels-b", required=True)
    p.add_argument("--true-model", default=None, help="model JSON with the true loadings")
    p.add_argument("--model", default=None, help="model JSON with estimated loadings")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run the Monte Carlo recovery experiment")
    p.add_argument("--n", type=_ints, default=[100, 300])
    p.add_argument("--d", type=_ints, default=[10])
    p.add_argument("--m", type=_floats, default=[0.5, 1.0])
    p.add_argument("--include-d1000", action="store_true", help="add the D=1000 cells")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tune", choices=["first", "each", "fixed"], default="first")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="lambda for --tune fixed")
    p.add_argument("--grid", type=_floats, default=None)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DataFormatError, ValueError, FileNotFoundError) as exc:
        print(f"clusbird {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical or I/O failure
        print(f"clusbird {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
