"""Multi-solver benchmark harness with rank aggregation.

Runs every configured solver on every dataset, extracts the clock value
(iterations or wall seconds) at which each precision level was first
reached, ranks the solvers per dataset and level (average ranks on ties,
+inf for unreached levels) and averages the ranks across datasets.  With
known-solution datasets the precision is the true error f(beta^k) -
f(beta*); otherwise the recorded gap estimate is used.

Ranking on iteration counts is deterministic and is the CI mode; wall-clock
ranking reproduces the time-based methodology but is subject to measurement
jitter.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .simulate import LabeledDataset, SimulationDesign, generate_dataset, load_dataset
from .solvers import SolverConfig, SolverResult, conesta, fista_fixed_mu, inexact_fista

__all__ = [
    "DEFAULT_LEVELS",
    "BenchConfig",
    "BenchRun",
    "RankTable",
    "run_bench",
    "clock_to_levels",
    "average_ranks",
]

DEFAULT_LEVELS = tuple(10.0 ** (-i) for i in range(7))


@dataclass
class BenchConfig:
    """Benchmark specification (usually read from a JSON file).

    datasets: directories of saved datasets; designs: inline design dicts to
    generate (a design without a seed gets seed + its index).  Each solver
    dict needs a "kind" ("conesta", "fista-fixed" with "mode" chen|large, or
    "inexact"; "fista-chen"/"fista-large" are accepted aliases) and may
    override "eps" and "label".
    """

    solvers: list = field(default_factory=list)
    datasets: list = field(default_factory=list)
    designs: list = field(default_factory=list)
    levels: tuple = DEFAULT_LEVELS
    rank_by: str = "time"
    eps: float = 1e-6
    max_inner_total: int = 100_000
    max_inner_per_step: int = 10_000
    gap_check_period: int = 10
    wall_cap_seconds: float | None = None
    out_dir: str = "bench_out"
    seed: int = 0
    plot: bool = False

    def __post_init__(self):
        if not self.solvers:
            raise ValueError("need at least one solver")
        if not self.datasets and not self.designs:
            raise ValueError("need at least one dataset or design")
        levels = tuple(float(v) for v in self.levels)
        if len(levels) < 1 or np.any(np.diff(levels) >= 0):
            raise ValueError("precision levels must be strictly decreasing")
        self.levels = levels
        if self.rank_by not in ("time", "iters"):
            raise ValueError("rank_by must be 'time' or 'iters'")

    @classmethod
    def from_json(cls, path, **overrides) -> "BenchConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


@dataclass
class BenchRun:
    """One (dataset, solver) cell of the benchmark."""

    dataset: str
    solver: str
    result: SolverResult
    f_star: float | None
    iters_to_level: list
    seconds_to_level: list


class RankTable:
    """Mean rank of each solver at each precision level."""

    def __init__(self, solvers, levels, mean_rank, n_reached, rank_by):
        self.solvers = list(solvers)
        self.levels = list(levels)
        self.mean_rank = np.asarray(mean_rank, dtype=np.float64)
        self.n_reached = np.asarray(n_reached, dtype=np.int64)
        self.rank_by = rank_by

    def rank_of(self, solver, level) -> float:
        i = self.solvers.index(solver)
        j = self.levels.index(level)
        return float(self.mean_rank[i, j])

    def to_csv_text(self) -> str:
        lines = ["solver,level,mean_rank,n_reached"]
        for i, solver in enumerate(self.solvers):
            for j, level in enumerate(self.levels):
                lines.append(
                    f"{solver},{format(level, '.17g')},"
                    f"{format(self.mean_rank[i, j], '.17g')},{self.n_reached[i, j]}"
                )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())


def solver_label(spec: dict) -> str:
    if "label" in spec:
        return str(spec["label"])
    kind = spec["kind"]
    if kind == "fista-fixed":
        return f"fista-{spec.get('mode', 'chen')}"
    return kind


def _normalize_solver_spec(spec: dict) -> dict:
    spec = dict(spec)
    kind = spec.get("kind", "")
    if kind in ("fista-chen", "fista-large"):
        spec["kind"] = "fista-fixed"
        spec.setdefault("mode", kind.split("-", 1)[1])
    return spec


def run_solver(spec: dict, problem, cfg: BenchConfig, beta0=None) -> SolverResult:
    """Dispatch one solver spec on one problem."""
    spec = _normalize_solver_spec(spec)
    kind = spec["kind"]
    eps = float(spec.get("eps", cfg.eps))
    solver_cfg = SolverConfig(
        eps=eps,
        tau=float(spec.get("tau", 0.5)),
        max_inner_total=int(spec.get("max_inner_total", cfg.max_inner_total)),
        max_inner_per_step=int(spec.get("max_inner_per_step", cfg.max_inner_per_step)),
        mu_fixed=spec.get("mu"),
        gap_check_period=int(spec.get("gap_check_period", cfg.gap_check_period)),
        wall_cap_seconds=spec.get("wall_cap_seconds", cfg.wall_cap_seconds),
    )
    if kind == "conesta":
        return conesta(problem, beta0, solver_cfg)
    if kind == "fista-fixed":
        return fista_fixed_mu(problem, beta0, eps, spec.get("mode", "chen"), solver_cfg)
    if kind == "inexact":
        return inexact_fista(problem, beta0, eps, float(spec.get("delta", 0.01)), solver_cfg)
    raise ValueError(f"unknown solver kind: {kind!r}")


def clock_to_levels(trace, levels, f_star=None):
    """First (iterations, seconds) at which each level was reached.

    Uses the true error when f_star is known, the recorded gap estimate
    otherwise; levels never reached map to None.
    """
    if f_star is not None:
        errs = [r.f - f_star for r in trace.records]
    else:
        errs = [r.gap for r in trace.records]
    out = []
    for level in levels:
        hit = None
        for r, err in zip(trace.records, errs):
            if err <= level:
                hit = (r.k, r.seconds)
                break
        out.append(hit)
    return out


def average_ranks(values) -> np.ndarray:
    """Average-tie ranks of a list of clock values (None -> +inf)."""
    arr = np.array([np.inf if v is None else float(v) for v in values])
    return rankdata(arr, method="average")


def _dataset_name(i, design: SimulationDesign) -> str:
    return f"sim{i:03d}-seed{design.seed}"


def _load_benchmark_datasets(cfg: BenchConfig):
    named = []
    for path in cfg.datasets:
        named.append((Path(path).name or str(path), load_dataset(path)))
    for i, raw in enumerate(cfg.designs):
        raw = dict(raw)
        raw.setdefault("seed", cfg.seed + i)
        design = SimulationDesign(**raw)
        named.append((_dataset_name(i, design), generate_dataset(design)))
    return named


def run_bench(cfg: BenchConfig):
    """Run the full benchmark; returns (RankTable, list of BenchRun).

    Writes ranks.csv and one trace CSV per (dataset, solver) cell under the
    output directory; optionally renders a convergence figure per dataset.
    Cells may run concurrently (capped by the CONESTA_THREADS environment
    variable); results are merged in deterministic (dataset, solver) order.
    """
    out_dir = Path(cfg.out_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    datasets = _load_benchmark_datasets(cfg)
    labels = [solver_label(s) for s in cfg.solvers]
    if len(set(labels)) != len(labels):
        raise ValueError("solver labels must be unique")

    jobs = [
        (ds_name, ds, label, spec)
        for ds_name, ds in datasets
        for label, spec in zip(labels, cfg.solvers)
    ]

    def run_cell(job):
        ds_name, ds, label, spec = job
        result = run_solver(spec, ds.problem(), cfg)
        return ds_name, label, ds, result

    max_workers = max(1, int(os.environ.get("CONESTA_THREADS", "1") or "1"))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            cell_results = list(pool.map(run_cell, jobs))
    else:
        cell_results = [run_cell(job) for job in jobs]

    runs = []
    for ds_name, label, ds, result in cell_results:
        result.trace.write_csv(out_dir / "traces" / f"{ds_name}__{label}.csv")
        hits = clock_to_levels(result.trace, cfg.levels, ds.f_star)
        runs.append(BenchRun(
            dataset=ds_name,
            solver=label,
            result=result,
            f_star=ds.f_star,
            iters_to_level=[None if h is None else h[0] for h in hits],
            seconds_to_level=[None if h is None else h[1] for h in hits],
        ))

    clock_attr = "iters_to_level" if cfg.rank_by == "iters" else "seconds_to_level"
    by_cell = {(r.dataset, r.solver): r for r in runs}
    n_solvers, n_levels = len(labels), len(cfg.levels)
    rank_sum = np.zeros((n_solvers, n_levels))
    n_reached = np.zeros((n_solvers, n_levels), dtype=np.int64)
    for ds_name, _ in datasets:
        for j in range(n_levels):
            values = [getattr(by_cell[(ds_name, lab)], clock_attr)[j] for lab in labels]
            ranks = average_ranks(values)
            rank_sum[:, j] += ranks
            for i, v in enumerate(values):
                if v is not None:
                    n_reached[i, j] += 1
    table = RankTable(labels, cfg.levels, rank_sum / len(datasets), n_reached,
                      cfg.rank_by)
    table.write_csv(out_dir / "ranks.csv")

    if cfg.plot:
        from .plotting import render_convergence

        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        for ds_name, ds in datasets:
            traces = {
                lab: by_cell[(ds_name, lab)].result.trace for lab in labels
            }
            render_convergence(traces, fig_dir / f"{ds_name}.svg", f_star=ds.f_star)
    return table, runs
