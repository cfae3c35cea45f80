"""Solvers: FISTA on the smoothed problem, gap-driven continuation, baselines.

All solvers minimise the same composite objective (see ``objective``) and
share the trace format.  ``conesta`` is the continuation scheme: it solves a
sequence of smoothed problems whose smoothing parameters are derived from
duality-gap probes of the distance to the optimum, warm-starting each stage
from the previous solution.  ``fista_fixed_mu`` and ``inexact_fista`` are
the single-smoothing and approximate-proximal baselines it is benchmarked
against.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .objective import Problem, _gap_bundle, prox_l1
from .smoothing import (
    MU_MIN,
    dual_maximizer_from_product,
    lipschitz_step,
    m_constant,
    project_rows,
)

__all__ = [
    "SolverConfig",
    "SolverTrace",
    "SolverResult",
    "ContinuationStep",
    "TraceRecord",
    "mu_optimal",
    "fista",
    "conesta",
    "fista_fixed_mu",
    "inexact_fista",
]

# Negligible smoothing used when probing the non-smooth gap (continuation
# init, inexact/structureless stopping tests).
MU_PROBE = 1e-8

TRACE_HEADER = "k,outer,f,f_mu,gap,mu,seconds"


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TraceRecord:
    """One recorded (gap-checked) iterate."""

    k: int
    outer: int
    f: float
    f_mu: float
    gap: float
    mu: float
    seconds: float


class SolverTrace:
    """Per-iteration records of objective values and gap estimates.

    Rows are appended whenever the duality gap is evaluated; ``k`` is the
    cumulative iteration count and is strictly increasing, ``outer`` the
    continuation step the iterate belongs to (0 before or without
    continuation), and ``gap`` the non-smooth upper-bound estimate at the
    recorded smoothing level ``mu``.
    """

    def __init__(self):
        self.records: list[TraceRecord] = []
        # Iterations whose inexact proximal subproblem ran out of budget.
        self.prox_budget_hits: list[int] = []

    def append(self, k, outer, f, f_mu, gap, mu, seconds):
        self.records.append(
            TraceRecord(int(k), int(outer), float(f), float(f_mu), float(gap),
                        float(mu), float(seconds))
        )

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def __len__(self):
        return len(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(TRACE_HEADER + "\n")
            for r in self.records:
                fh.write(
                    f"{r.k},{r.outer},{_fmt(r.f)},{_fmt(r.f_mu)},"
                    f"{_fmt(r.gap)},{_fmt(r.mu)},{_fmt(r.seconds)}\n"
                )

    @classmethod
    def read_csv(cls, path) -> "SolverTrace":
        trace = cls()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                k, outer, f, f_mu, gap, mu, seconds = line.split(",")
                trace.append(int(k), int(outer), float(f), float(f_mu),
                             float(gap), float(mu), float(seconds))
        return trace


@dataclass
class SolverConfig:
    """Solver parameters.

    eps : target precision on f(beta) - f(beta*), certified by the gap.
    tau : continuation decrease factor in (0, 1).
    max_outer : cap on continuation steps.
    max_inner_total : total iteration budget across all stages.
    max_inner_per_step : iteration cap for a single inner solve (also caps
        each inexact proximal subproblem).
    mu_fixed : explicit smoothing parameter for the fixed-mu solver.
    gap_check_period : iterations between gap evaluations; the gap costs two
        extra matrix products, so it is amortised (the final iterate of
        every stage is always checked).
    wall_cap_seconds : optional wall-clock abort, checked at gap evaluations.
    """

    eps: float = 1e-6
    tau: float = 0.5
    max_outer: int = 200
    max_inner_total: int = 100_000
    max_inner_per_step: int = 10_000
    mu_fixed: float | None = None
    gap_check_period: int = 10
    wall_cap_seconds: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.gap_check_period < 1:
            raise ValueError("gap_check_period must be >= 1")
        if self.max_inner_total < 1 or self.max_inner_per_step < 1:
            raise ValueError("iteration budgets must be >= 1")


@dataclass(frozen=True)
class ContinuationStep:
    """Bookkeeping of one continuation stage."""

    index: int
    mu: float
    eps_target: float
    eps_mu: float
    inner_iterations: int
    eps_achieved: float
    eps_next: float


@dataclass
class SolverResult:
    """Outcome of a solver run; converged implies final_gap <= the target."""

    beta: np.ndarray
    trace: SolverTrace
    converged: bool
    final_gap: float
    inner_iterations: int
    continuation: list[ContinuationStep] | None = None


def mu_optimal(eps, gamma, M, norm_A_sq, L_g) -> float:
    """Smoothing parameter minimising the worst-case iteration bound.

    mu = (-gamma M ||A||^2 + sqrt((gamma M ||A||^2)^2 + M L_g ||A||^2 eps))
         / (M L_g)

    Strictly positive and strictly increasing in eps; for gamma = 0 it
    reduces to sqrt(eps ||A||^2 / (M L_g)).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not M > 0:
        raise ValueError("M must be positive (structureless problems bypass smoothing)")
    if not norm_A_sq > 0:
        raise ValueError("norm_A_sq must be positive")
    if not L_g > 0:
        raise ValueError("L_g must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    a = gamma * M * norm_A_sq
    return (-a + math.sqrt(a * a + M * L_g * norm_A_sq * eps)) / (M * L_g)


def _fista_loop(problem, beta0, eps_mu, mu, max_iters, trace, outer, k_base,
                t_start, period, wall_cap, mu_gap_offset):
    """Accelerated proximal gradient on f_mu; stops when gap_mu <= eps_mu.

    Momentum weight (k - 2)/(k + 1), prox = soft threshold at step * l1.
    Returns (beta, last_gap_mu, iterations_used, converged, wall_aborted).
    """
    w = problem.weights
    op = problem.op
    structured = w.tv != 0 and op.n_rows > 0
    t = lipschitz_step(op, mu, w.tv if structured else 0.0, problem.lipschitz_g())
    thresh = t * w.l1

    # Hot loop: bind everything once and use the unchecked operator products.
    g_grad = problem.g_grad
    mat = op._mat
    mat_t = op._mat_t
    tv = w.tv

    beta = np.asarray(beta0, dtype=np.float64).ravel().copy()
    beta_prev = beta.copy()
    gap_mu_val = math.inf
    converged = False
    aborted = False
    it = 0
    while it < max_iters:
        it += 1
        mom = (it - 1.0) / (it + 2.0)
        z = beta + mom * (beta - beta_prev)
        grad = g_grad(z)
        if structured:
            alpha, _ = dual_maximizer_from_product(op, mat @ z, mu)
            grad += tv * (mat_t @ alpha)
        beta_prev = beta
        beta = prox_l1(z - t * grad, thresh)
        if it % period == 0 or it == max_iters:
            gap_mu_val, f_val, f_mu_val = _gap_bundle(problem, beta, mu)
            now = time.perf_counter() - t_start
            trace.append(k_base + it, outer, f_val, f_mu_val,
                         gap_mu_val + mu_gap_offset, mu, now)
            if gap_mu_val <= eps_mu:
                converged = True
                break
            if wall_cap is not None and now > wall_cap:
                aborted = True
                break
    return beta, gap_mu_val, it, converged, aborted


def fista(problem: Problem, beta0, eps_mu, mu, budget=100_000, *,
          gap_check_period=10, wall_cap_seconds=None) -> SolverResult:
    """Solve the smoothed problem at fixed mu to gap_mu <= eps_mu.

    Returns the last iterate (not the momentum point).  ``converged`` is
    False when the budget runs out before the gap target is met.
    """
    if not eps_mu > 0:
        raise ValueError("eps_mu must be positive")
    beta0 = np.zeros(problem.p) if beta0 is None else beta0
    trace = SolverTrace()
    t0 = time.perf_counter()
    offset = mu * problem.weights.tv * m_constant(problem.op)
    beta, gap_mu_val, used, converged, _ = _fista_loop(
        problem, beta0, eps_mu, mu, int(budget), trace, 0, 0, t0,
        gap_check_period, wall_cap_seconds, offset,
    )
    return SolverResult(beta, trace, converged, float(gap_mu_val), used)


def conesta(problem: Problem, beta0=None, config: SolverConfig | None = None,
            **kwargs) -> SolverResult:
    """Continuation solver driven by duality-gap probes.

    Starting from a gap probe at negligible smoothing, each stage solves the
    smoothed problem to the precision left over after the smoothing offset,
    re-probes the distance to the optimum, shrinks the target by ``tau`` and
    derives the next (optimal) smoothing parameter.  Terminates when the gap
    estimate certifies f(beta) - f(beta*) <= eps.
    """
    cfg = config if config is not None else SolverConfig(**kwargs)
    w = problem.weights
    op = problem.op
    beta = np.zeros(problem.p) if beta0 is None else np.asarray(beta0, float).ravel().copy()
    trace = SolverTrace()
    t0 = time.perf_counter()

    M = m_constant(op)
    gM = w.tv * M
    norm_a_sq = op.spectral_norm() ** 2 if (w.tv > 0 and op.n_rows > 0) else 0.0

    gap0, f0, f_mu0 = _gap_bundle(problem, beta, MU_PROBE)
    trace.append(0, 0, f0, f_mu0, gap0 + MU_PROBE * gM, MU_PROBE, time.perf_counter() - t0)
    if gap0 + MU_PROBE * gM <= cfg.eps:
        return SolverResult(beta, trace, True, gap0 + MU_PROBE * gM, 0, [])

    if gM == 0.0 or norm_a_sq == 0.0:
        # No structure to smooth: a single stage at negligible mu solves the
        # l1 + ridge problem directly (the gap offset vanishes).
        beta, gap_mu_val, used, converged, _ = _fista_loop(
            problem, beta, cfg.eps, MU_PROBE, cfg.max_inner_total, trace, 1, 0,
            t0, cfg.gap_check_period, cfg.wall_cap_seconds, 0.0,
        )
        return SolverResult(beta, trace, converged, float(gap_mu_val), used, [])

    L_g = problem.lipschitz_g()
    # A warm start can probe better than the target already; the stage
    # target must stay positive for the smoothing schedule to be defined.
    eps_i = cfg.tau * max(gap0, cfg.eps)
    mu_i = max(mu_optimal(eps_i, w.tv, M, norm_a_sq, L_g), MU_MIN)

    steps: list[ContinuationStep] = []
    total = 0
    converged = False
    final_gap = gap0 + MU_PROBE * gM
    for i in range(1, cfg.max_outer + 1):
        eps_mu = eps_i - mu_i * gM
        while eps_mu < 0.1 * eps_i:
            # The inner target must stay a meaningful fraction of the stage
            # target; halve the smoothing until it does.
            mu_i *= 0.5
            eps_mu = eps_i - mu_i * gM
        cap = min(cfg.max_inner_per_step, cfg.max_inner_total - total)
        if cap <= 0:
            break
        beta, gap_mu_val, used, _, aborted = _fista_loop(
            problem, beta, eps_mu, mu_i, cap, trace, i, total, t0,
            cfg.gap_check_period, cfg.wall_cap_seconds, mu_i * gM,
        )
        total += used
        # The inner loop's final stopping evaluation was taken at the
        # returned iterate, so it is exactly the re-probe of this stage.
        eps_achieved = gap_mu_val + mu_i * gM
        eps_next = cfg.tau * eps_achieved
        steps.append(ContinuationStep(i, mu_i, eps_i, eps_mu, used,
                                      eps_achieved, eps_next))
        final_gap = eps_achieved
        if eps_achieved <= cfg.eps:
            converged = True
            break
        if aborted or total >= cfg.max_inner_total:
            break
        eps_i = eps_next
        # mu is nonincreasing across stages even if a budget-limited stage
        # left the gap estimate above its target.
        mu_i = min(max(mu_optimal(eps_i, w.tv, M, norm_a_sq, L_g), MU_MIN), mu_i)

    return SolverResult(beta, trace, converged, float(final_gap), total, steps)


def chen_mu(eps, gamma, M) -> float:
    """Fixed smoothing eps / (2 gamma M): guarantees eps is reachable."""
    if gamma * M <= 0:
        raise ValueError("fixed-mu smoothing needs gamma > 0 and a nonempty operator")
    return eps / (2.0 * gamma * M)


def fista_fixed_mu(problem: Problem, beta0, eps, mode="chen",
                   config: SolverConfig | None = None) -> SolverResult:
    """Single FISTA run at a fixed smoothing parameter.

    mode "chen" uses mu = eps / (2 gamma M), which makes the target
    reachable; mode "large" uses its square root, which is faster per
    iteration but may stall above the target.  An explicit value can be
    forced through config.mu_fixed.  Stops when the non-smooth gap estimate
    drops below eps or the budget runs out.
    """
    cfg = config if config is not None else SolverConfig(eps=eps)
    w = problem.weights
    M = m_constant(problem.op)
    if cfg.mu_fixed is not None:
        mu = float(cfg.mu_fixed)
    elif mode == "chen":
        mu = chen_mu(eps, w.tv, M)
    elif mode == "large":
        mu = math.sqrt(chen_mu(eps, w.tv, M))
    else:
        raise ValueError(f"unknown fixed-mu mode: {mode!r}")
    mu = max(mu, MU_MIN)

    beta0 = np.zeros(problem.p) if beta0 is None else beta0
    trace = SolverTrace()
    t0 = time.perf_counter()
    offset = mu * w.tv * M
    gap0, f0, f_mu0 = _gap_bundle(problem, np.asarray(beta0, float).ravel(), mu)
    trace.append(0, 0, f0, f_mu0, gap0 + offset, mu, time.perf_counter() - t0)
    if gap0 + offset <= eps:
        return SolverResult(np.asarray(beta0, float).ravel().copy(), trace, True,
                            gap0 + offset, 0)

    # gap_mu <= eps - offset is equivalent to the non-smooth estimate <= eps;
    # for the large mode the right-hand side may be nonpositive, in which
    # case the run is budget-bound by construction.
    eps_mu = eps - offset
    beta, gap_mu_val, used, converged, _ = _fista_loop(
        problem, beta0, eps_mu, mu, cfg.max_inner_total, trace, 0, 0, t0,
        cfg.gap_check_period, cfg.wall_cap_seconds, offset,
    )
    return SolverResult(beta, trace, converged, float(gap_mu_val + offset), used)


def _approx_group_prox(op, v, scale, tol, alpha0, cap, norm_a_sq):
    """Approximate prox of scale * sum_g ||A_g . ||_2 at v.

    Projected gradient ascent on the dual  max_{||alpha_g|| <= 1}
    scale <alpha, A v> - scale^2/2 ||A^T alpha||^2  with step 1/||A||^2;
    u(alpha) = v - scale * A^T alpha.  The subproblem duality gap is
    scale * (s(u) - <alpha, A u>), evaluated exactly at each iterate.

    Returns (u, alpha, iterations, budget_hit).
    """
    alpha = project_rows(op, alpha0)
    u = v - scale * op.apply_transpose(alpha)
    it = 0
    budget_hit = False
    while True:
        a_u = op.apply(u)
        dual_gap = scale * float(op.group_norms(a_u).sum() - alpha @ a_u)
        if dual_gap <= tol:
            break
        if it >= cap:
            budget_hit = True
            break
        alpha = project_rows(op, alpha + a_u / (scale * norm_a_sq))
        u = v - scale * op.apply_transpose(alpha)
        it += 1
    return u, alpha, it, budget_hit


def inexact_fista(problem: Problem, beta0, eps, delta=0.01,
                  config: SolverConfig | None = None) -> SolverResult:
    """FISTA on the non-smooth problem with an approximated structure prox.

    Each outer iteration takes a gradient step on the smooth loss, applies an
    approximate prox of the structure penalty (an inner dual
    projected-gradient loop run to tolerance c / k^(4 + delta) at outer
    iteration k, with c the initial gap estimate) and then the exact l1
    prox.  Each prox subproblem is solved from scratch, so its cost grows
    with the accuracy the schedule demands; trace iteration counts include
    that inner work, keeping the iteration clock comparable across solvers.

    Stopping uses the gap estimate at a negligible smoothing level scaled to
    leave room under eps for the smoothing offset itself.
    """
    cfg = config if config is not None else SolverConfig(eps=eps)
    w = problem.weights
    op = problem.op
    structured = w.tv != 0 and op.n_rows > 0
    beta = np.zeros(problem.p) if beta0 is None else np.asarray(beta0, float).ravel().copy()
    beta_prev = beta.copy()
    trace = SolverTrace()
    t0 = time.perf_counter()

    gM = w.tv * m_constant(op)
    mu_probe = MU_PROBE if gM == 0 else min(MU_PROBE, max(eps / (4.0 * gM), MU_MIN))
    t_step = 1.0 / problem.lipschitz_g()
    thresh = t_step * w.l1
    prox_scale = t_step * w.tv

    gap0, f0, f_mu0 = _gap_bundle(problem, beta, mu_probe)
    est = gap0 + mu_probe * gM
    trace.append(0, 0, f0, f_mu0, est, mu_probe, time.perf_counter() - t0)
    if est <= eps:
        return SolverResult(beta, trace, True, est, 0)
    tol_scale = est

    norm_a_sq = op.spectral_norm() ** 2 if structured else 0.0
    work = 0
    it = 0
    converged = False
    while work < cfg.max_inner_total:
        it += 1
        mom = (it - 1.0) / (it + 2.0)
        z = beta + mom * (beta - beta_prev)
        v = z - t_step * problem.g_grad(z)
        if structured and norm_a_sq > 0:
            tol_k = tol_scale / float(it + 1) ** (4.0 + delta)
            u, _, inner_used, budget_hit = _approx_group_prox(
                op, v, prox_scale, tol_k, np.zeros(op.n_rows),
                cfg.max_inner_per_step, norm_a_sq,
            )
            work += inner_used
        else:
            u = v
            budget_hit = False
        beta_prev = beta
        beta = prox_l1(u, thresh)
        work += 1
        if budget_hit:
            trace.prox_budget_hits.append(work)
        if it % cfg.gap_check_period == 0 or work >= cfg.max_inner_total:
            gap_val, f_val, f_mu_val = _gap_bundle(problem, beta, mu_probe)
            est = gap_val + mu_probe * gM
            now = time.perf_counter() - t0
            trace.append(work, 0, f_val, f_mu_val, est, mu_probe, now)
            if est <= eps:
                converged = True
                break
            if cfg.wall_cap_seconds is not None and now > cfg.wall_cap_seconds:
                break
    return SolverResult(beta, trace, converged, float(est), work)
