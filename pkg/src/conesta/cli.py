"""Command-line front end: simulate, solve, bench, plot.

Exit codes: 0 on success, 2 on invalid arguments or inputs, 3 on numerical
failure (infeasible calibration, non-finite results).  All printed numbers
use 17 significant digits.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .objective import PenaltyWeights, Problem
from .operators import GridMask, build_tv_operator, read_mask_file
from .simulate import SimulationDesign, generate_dataset, load_dataset
from .solvers import SolverConfig, SolverTrace, conesta, fista_fixed_mu, inexact_fista


def _fmt(x) -> str:
    return format(float(x), ".17g")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conesta",
        description="Solvers and benchmarks for regression with elastic-net "
                    "and structured (total-variation / group) penalties.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a dataset with a known minimiser")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--p", type=int, required=True)
    p_sim.add_argument("--correlation", choices=("low", "medium", "high"), default="low")
    p_sim.add_argument("--sparsity", type=float, default=0.5)
    p_sim.add_argument("--snr", type=float, default=0.5)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--l1", type=float, default=0.618)
    p_sim.add_argument("--l2", type=float, default=1.0 - 0.618)
    p_sim.add_argument("--tv", type=float, default=1.618)
    p_sim.add_argument("--out", required=True, help="dataset output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_solve = sub.add_parser("solve", help="run one solver on a dataset")
    src = p_solve.add_argument_group("input (dataset directory or raw CSVs)")
    src.add_argument("--data", help="dataset directory from `simulate`")
    src.add_argument("--X", dest="x_csv", help="raw data matrix CSV")
    src.add_argument("--y", dest="y_csv", help="raw target CSV")
    p_solve.add_argument("--mask", help="grid mask file for the TV operator "
                                        "(default: 1D chain over the p columns)")
    p_solve.add_argument("--solver", default="conesta",
                         choices=("conesta", "fista-fixed", "inexact"))
    p_solve.add_argument("--mode", choices=("chen", "large"), default="chen",
                         help="fixed-mu choice for --solver fista-fixed")
    p_solve.add_argument("--mu", type=float, help="explicit fixed smoothing parameter")
    p_solve.add_argument("--l1", type=float)
    p_solve.add_argument("--l2", type=float)
    p_solve.add_argument("--tv", type=float)
    p_solve.add_argument("--eps", type=float, default=1e-6)
    p_solve.add_argument("--tau", type=float, default=0.5)
    p_solve.add_argument("--delta", type=float, default=0.01,
                         help="prox tolerance exponent offset for --solver inexact")
    p_solve.add_argument("--budget", type=int, default=100_000,
                         help="total inner-iteration budget")
    p_solve.add_argument("--max-outer", type=int, default=200)
    p_solve.add_argument("--gap-period", type=int, default=10)
    p_solve.add_argument("--wall-cap", type=float, default=None,
                         help="wall-clock cap in seconds")
    p_solve.add_argument("--warm-start", help="beta CSV to start from")
    p_solve.add_argument("--out", required=True, help="result output directory")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run a multi-solver benchmark")
    p_bench.add_argument("config", help="JSON benchmark configuration")
    p_bench.add_argument("--out", help="override the output directory")
    p_bench.add_argument("--rank-by", choices=("time", "iters"), default=None,
                         help="ranking clock (iters is the deterministic mode)")
    p_bench.add_argument("--plot", action="store_true",
                         help="render one convergence figure per dataset")
    p_bench.set_defaults(func=cmd_bench)

    p_plot = sub.add_parser("plot", help="render convergence traces to a figure")
    p_plot.add_argument("traces", nargs="+", help="trace CSV files")
    p_plot.add_argument("--out", required=True, help="output figure (SVG)")
    p_plot.add_argument("--data", help="dataset directory providing f_star")
    p_plot.add_argument("--fstar", type=float, default=None,
                        help="explicit optimal value for the error axis")
    p_plot.add_argument("--title")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def cmd_simulate(args) -> int:
    weights = PenaltyWeights(l1=args.l1, l2=args.l2, tv=args.tv)
    design = SimulationDesign(
        n=args.n, p=args.p, correlation=args.correlation,
        sparsity=args.sparsity, snr=args.snr, seed=args.seed, weights=weights,
    )
    ds = generate_dataset(design)
    ds.save(args.out)
    print(f"f_star {_fmt(ds.f_star)}")
    print(f"kkt_residual {_fmt(ds.kkt_residual)}")
    return 0


def _load_solve_inputs(args):
    if args.data:
        ds = load_dataset(args.data)
        X, y = ds.X, ds.y
        weights = ds.weights
        f_star = ds.f_star
    elif args.x_csv and args.y_csv:
        X = np.loadtxt(args.x_csv, delimiter=",", ndmin=2)
        y = np.loadtxt(args.y_csv, delimiter=",").ravel()
        weights = None
        f_star = None
    else:
        raise ValueError("provide either --data or both --X and --y")
    override = {k: getattr(args, k) for k in ("l1", "l2", "tv") if getattr(args, k) is not None}
    if override:
        base = {"l1": weights.l1, "l2": weights.l2, "tv": weights.tv} if weights else {}
        base.update(override)
        weights = PenaltyWeights(**base)
    if weights is None:
        raise ValueError("raw inputs need explicit --l1, --l2 and --tv")
    if args.mask:
        mask = read_mask_file(args.mask)
        if mask.p != X.shape[1]:
            raise ValueError(f"mask has {mask.p} cells but X has {X.shape[1]} columns")
    else:
        mask = GridMask.chain(X.shape[1])
    op = build_tv_operator(mask)
    return Problem(X, y, weights, op), f_star


def cmd_solve(args) -> int:
    problem, f_star = _load_solve_inputs(args)
    beta0 = None
    if args.warm_start:
        beta0 = np.loadtxt(args.warm_start, delimiter=",").ravel()
    cfg = SolverConfig(
        eps=args.eps, tau=args.tau, max_outer=args.max_outer,
        max_inner_total=args.budget, mu_fixed=args.mu,
        gap_check_period=args.gap_period, wall_cap_seconds=args.wall_cap,
    )
    if args.solver == "conesta":
        result = conesta(problem, beta0, cfg)
    elif args.solver == "fista-fixed":
        result = fista_fixed_mu(problem, beta0, args.eps, args.mode, cfg)
    else:
        result = inexact_fista(problem, beta0, args.eps, args.delta, cfg)
    if not np.all(np.isfinite(result.beta)):
        raise NumericalError("solver produced non-finite coefficients")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.write_csv(out / "trace.csv")
    with open(out / "beta.csv", "w", encoding="utf-8") as fh:
        for v in result.beta:
            fh.write(_fmt(v) + "\n")
    f_final = problem.f_value(result.beta)
    summary = {
        "solver": args.solver,
        "eps": args.eps,
        "f": f_final,
        "gap": result.final_gap,
        "converged": bool(result.converged),
        "inner_iterations": int(result.inner_iterations),
        "outer_steps": len(result.continuation) if result.continuation is not None else 0,
    }
    if f_star is not None:
        summary["error_to_optimum"] = f_final - f_star
    with open(out / "result.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"converged {str(bool(result.converged)).lower()}")
    print(f"f {_fmt(f_final)}")
    print(f"gap {_fmt(result.final_gap)}")
    print(f"inner_iterations {result.inner_iterations}")
    return 0


def cmd_bench(args) -> int:
    from .bench import BenchConfig, run_bench

    cfg = BenchConfig.from_json(args.config, out_dir=args.out, rank_by=args.rank_by)
    if args.plot:
        cfg.plot = True
    table, runs = run_bench(cfg)
    print(f"ranks written to {Path(cfg.out_dir) / 'ranks.csv'} "
          f"({len(runs)} runs, rank_by={table.rank_by})")
    return 0


def cmd_plot(args) -> int:
    from .plotting import render_convergence

    f_star = args.fstar
    if args.data:
        f_star = load_dataset(args.data).f_star
    traces = {}
    for path in args.traces:
        name = Path(path).stem
        if name in traces:
            raise ValueError(f"duplicate trace name: {name}")
        traces[name] = SolverTrace.read_csv(path)
    info = render_convergence(traces, args.out, f_star=f_star, title=args.title)
    for name, meta in info.items():
        print(f"{name}: {meta['points']} points, "
              f"{meta['continuation_dots']} continuation dots")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main())
