"""Command-line interface: ``penfpca fit | simulate | evaluate``.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .errors import FPCAError, InputError, NumericalError
from .fpca import Method, center_columns, fit_mpdc, fit_spdr, uncentered, variance_explained
from .grid_penalty import build_grid, build_penalty
from .selection import Criterion, as_alpha_grid, default_alpha_grid
from .simulation import (
    MSE_DISPLAY_FACTOR,
    SimConfig,
    default_mean_curve,
    generate,
    run_study,
)
from .spline import evaluate, interpolate

log = logging.getLogger("penfpca")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
REFINE = 10


class UsageError(InputError):
    pass


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _alpha_grid(args) -> np.ndarray:
    if args.alphas is not None:
        return as_alpha_grid(args.alphas)
    if args.alpha_exp_min > args.alpha_exp_max:
        raise UsageError("--alpha-exp-min must not exceed --alpha-exp-max")
    return default_alpha_grid(args.alpha_exp_min, args.alpha_exp_max)


def _add_alpha_flags(p):
    p.add_argument("--alphas", type=_float_list, help="explicit comma-separated alpha grid")
    p.add_argument("--alpha-exp-min", type=int, default=-5, help="grid is {0} U 1.5^i from this exponent")
    p.add_argument("--alpha-exp-max", type=int, default=25)


def refined_grid(times: np.ndarray, factor: int = REFINE) -> np.ndarray:
    return np.linspace(times[0], times[-1], factor * (times.shape[0] - 1) + 1)


def cmd_fit(args) -> int:
    grid_source = dataio.HEADER if args.header_grid else args.grid
    X, grid = dataio.load_matrix(args.input, grid_source)
    if args.transform == "sqrt_count":
        X = dataio.sqrt_count_transform(X)
    n, m = X.shape
    limit = min(n - 1, m) if args.method == "spdr" else min(n, m)
    if not 1 <= args.components <= limit:
        raise UsageError(f"--components must lie in [1, {limit}] for a {n}x{m} matrix")

    penalty = build_penalty(grid)
    data = center_columns(X, grid) if args.center else uncentered(X, grid)
    alphas = _alpha_grid(args)
    if args.method == "mpdc":
        result = fit_mpdc(data, penalty, args.components, alphas, Criterion(args.criterion))
    else:
        result = fit_spdr(data, penalty, args.components, alphas)

    out = Path(args.output_dir)
    if args.format == "json":
        dataio.save_result(out / "result.json", result)
    else:
        names = [f"v{k + 1}" for k in range(result.K)]
        dataio.write_curve(out / "loadings.csv", grid.times, result.loadings, names)
        dataio.write_csv(
            out / "scores.csv",
            [f"u{k + 1}" for k in range(result.K)],
            [list(map(float, r)) for r in result.scores],
        )
        dataio.write_csv(
            out / "components.csv",
            ["component", "alpha", "variance_fraction"],
            [(k + 1, c.alpha, float(f)) for k, (c, f) in enumerate(zip(result.components, variance_explained(result)))],
        )
    dataio.write_curve(out / "mean_curve.csv", grid.times, result.column_means, ["mean"])
    fine = refined_grid(grid.times)
    for k, c in enumerate(result.components, start=1):
        dataio.write_curve(out / f"loading_{k}.csv", fine, evaluate(interpolate(grid, c.loading), fine))
        if result.method is Method.MPDC or k == 1:
            name = f"selection_{k}.csv" if result.method is Method.MPDC else "selection.csv"
            dataio.write_trace(out / name, c.selection)
    if args.dump_penalty:
        dataio.dump_penalty(out, penalty)

    for k, (c, f) in enumerate(zip(result.components, variance_explained(result)), start=1):
        print(f"component {k}: alpha={c.alpha:.6g} variance={f:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    times = np.linspace(args.t_min, args.t_max, args.m)
    try:
        cfg = SimConfig(
            n=args.n,
            m=args.m,
            sigma1=args.sigma1,
            sigma2=args.sigma2,
            sigma=args.sigma,
            t_min=args.t_min,
            t_max=args.t_max,
            replicates=args.replicates,
            base_seed=args.seed,
            mean_curve=default_mean_curve(times) if args.mean_curve == "sin" else None,
            alpha_grid=tuple(float(a) for a in _alpha_grid(args)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    out = Path(args.output_dir)
    if args.dump:
        dataio.write_matrix(args.dump, generate(cfg, 0), build_grid(cfg.times()))
    report = run_study(cfg, workers=args.workers)
    dataio.write_json(out / "report.json", report.to_dict())
    dataio.write_csv(out / "table.csv", ["FPC", "Q1", "Median", "Mean", "Q3"], report.table_rows())
    dataio.write_csv(
        out / "mse.csv",
        ["replicate", "mpdc_fpc1", "mpdc_fpc2", "spdr_fpc1", "spdr_fpc2", "alpha1", "alpha2", "alpha_spdr"],
        [
            (r.index, *map(float, r.mse_mpdc), *map(float, r.mse_spdr), *map(float, r.alphas_mpdc), float(r.alpha_spdr))
            for r in report.per_replicate
        ],
    )

    print("SPDR/MPDC MSE ratio      Q1  Median    Mean      Q3")
    for label, *vals in report.table_rows():
        print(f"{label:<20} " + " ".join(f"{v:7.2f}" for v in vals))
    for k in (1, 2):
        mp = np.mean([r.mse_mpdc[k - 1] for r in report.per_replicate]) * MSE_DISPLAY_FACTOR
        sp = np.mean([r.mse_spdr[k - 1] for r in report.per_replicate]) * MSE_DISPLAY_FACTOR
        print(f"FPC{k}: mean MSE x1e4 mpdc={mp:.3f} spdr={sp:.3f} sign-test p={report.sign_test_p[f'fpc{k}']:.3g}")
    if report.failures:
        print(f"{len(report.failures)} replicate(s) excluded", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    result = dataio.load_result(args.result)
    if args.points is not None:
        t = np.asarray(args.points, dtype=float)
    elif args.uniform is not None:
        if len(args.uniform) != 3 or args.uniform[2] < 1 or args.uniform[2] != int(args.uniform[2]):
            raise UsageError("--uniform expects START,STOP,COUNT with integer COUNT >= 1")
        t = np.linspace(args.uniform[0], args.uniform[1], int(args.uniform[2]))
    else:
        t = refined_grid(result.grid.times)
    comps = args.components or list(range(1, result.K + 1))
    for k in comps:
        if k != int(k) or not 1 <= k <= result.K:
            raise UsageError(f"component {k:g} not in result (has {result.K})")
    comps = [int(k) for k in comps]
    cols = np.column_stack(
        [evaluate(interpolate(result.grid, result.components[k - 1].loading), t) for k in comps]
    )
    dataio.write_curve(args.output, t, cols, [f"gamma_{k}" for k in comps])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penfpca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="extract smoothed components from a data matrix")
    p.add_argument("input", help="CSV matrix, one curve per row")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", help="one-column CSV with the observation times")
    g.add_argument("--header-grid", action="store_true", help="first CSV row holds the times")
    p.add_argument("-k", "--components", type=int, default=2)
    _add_alpha_flags(p)
    p.add_argument("--criterion", choices=["cv", "gcv"], default="cv")
    p.add_argument("--method", choices=["mpdc", "spdr"], default="mpdc")
    p.add_argument("--transform", choices=["none", "sqrt_count"], default="none")
    p.add_argument("--no-center", dest="center", action="store_false")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--dump-penalty", action="store_true", help="also write Omega and its eigenpairs")
    p.add_argument("-o", "--output-dir", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison of mpdc and spdr")
    p.add_argument("--n", type=int, default=101)
    p.add_argument("--m", type=int, default=101)
    p.add_argument("--sigma1", type=float, default=20.0)
    p.add_argument("--sigma2", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--t-min", type=float, default=-1.0)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-curve", choices=["none", "sin"], default="none")
    _add_alpha_flags(p)
    p.add_argument("--workers", type=int, default=None, help="processes (default: $PENFPCA_WORKERS or CPU count)")
    p.add_argument("--dump", help="write replicate 0's data matrix (header = grid) to this CSV")
    p.add_argument("-o", "--output-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="evaluate fitted weight functions as splines")
    p.add_argument("result", help="result.json written by fit")
    p.add_argument("--components", type=_float_list, help="1-based component indices (default: all)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--points", type=_float_list, help="comma-separated evaluation points")
    g.add_argument("--uniform", type=_float_list, help="START,STOP,COUNT")
    p.add_argument("-o", "--output", default="curves.csv")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FPCAError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
