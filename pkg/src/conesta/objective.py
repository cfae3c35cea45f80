"""Penalised least-squares objective, its smoothed variant and duality gaps.

The composite objective is

    f(beta) = 1/2 ||X beta - y||^2 + l2/2 ||beta||^2
              + l1 ||beta||_1 + tv * s(beta),

with s the group-norm penalty of an attached structure operator.  Replacing
s by its smooth surrogate s_mu yields f_mu, which is minimised by proximal
gradient steps on the smooth part plus soft thresholding for the l1 term.

Writing the loss as l(z) = 1/2 ||z - y||^2 of z = X beta and collecting all
penalties into Omega_mu, Fenchel duality with the plug-in dual point
sigma = X beta - y gives a computable optimality certificate:

    gap_mu(beta) = f_mu(beta) + l*(sigma) + Omega_mu*(-X^T sigma)

upper-bounds f_mu(beta) - min f_mu and vanishes at the minimiser.  The
conjugate uses the surrogate's own maximiser alpha*(beta), which linearises
the smoothed structure term and keeps the bound valid for every iterate.
Adding the smoothing offset mu * tv * M converts it into an upper bound on
the distance to the optimum of the original non-smooth objective.
"""

from dataclasses import dataclass

import numpy as np

from .operators import LinearStructureOperator
from .smoothing import _check_mu, dual_maximizer_from_product, m_constant

__all__ = ["PenaltyWeights", "Problem", "prox_l1"]


@dataclass(frozen=True)
class PenaltyWeights:
    """Weights of the l1 (lasso), squared-l2 (ridge) and structure terms.

    ``l2`` must be strictly positive: the dual certificate divides by it.
    """

    l1: float
    l2: float
    tv: float

    def __post_init__(self):
        if not self.l2 > 0:
            raise ValueError("l2 must be strictly positive")
        if self.l1 < 0 or self.tv < 0:
            raise ValueError("l1 and tv must be nonnegative")


def prox_l1(z, t) -> np.ndarray:
    """Soft thresholding: componentwise sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


class Problem:
    """Least-squares regression with ridge, lasso and structured penalties.

    Parameters
    ----------
    X : (n, p) array
        Dense data matrix.
    y : (n,) array
        Targets.
    weights : PenaltyWeights
        Penalty weights (l1, l2, tv).
    op : LinearStructureOperator
        Structure operator with op.n_cols == p.

    Instances are immutable; the loss Lipschitz constant is cached
    write-once, so a Problem can be shared by concurrent solver runs.
    """

    def __init__(self, X, y, weights: PenaltyWeights, op: LinearStructureOperator):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2:
            raise ValueError("X must be a 2D array")
        if y.size != X.shape[0]:
            raise ValueError("y length must match the number of rows of X")
        if not isinstance(weights, PenaltyWeights):
            weights = PenaltyWeights(*weights)
        if op.n_cols != X.shape[1]:
            raise ValueError(
                f"operator has {op.n_cols} columns but X has {X.shape[1]}"
            )
        self.X = X
        self.y = y
        self.weights = weights
        self.op = op
        self.n, self.p = X.shape
        self._lipschitz_g = None
        # Precomputed Gram form of the loss gradient: one p x p product per
        # iteration instead of two n x p ones.  Skipped when the Gram matrix
        # would dwarf X itself or exceed a sane memory budget.
        if self.p <= 4096 and self.p <= 2 * self.n:
            self._XtX = X.T @ X
            self._Xty = X.T @ y
        else:
            self._XtX = None
            self._Xty = None

    # -- smooth part ---------------------------------------------------------

    def g_value(self, beta) -> float:
        """Least squares plus ridge: 1/2 ||X beta - y||^2 + l2/2 ||beta||^2."""
        beta = np.asarray(beta, dtype=np.float64).ravel()
        r = self.X @ beta - self.y
        return float(0.5 * (r @ r) + 0.5 * self.weights.l2 * (beta @ beta))

    def g_grad(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=np.float64).ravel()
        if self._XtX is not None:
            return self._XtX @ beta - self._Xty + self.weights.l2 * beta
        return self.X.T @ (self.X @ beta - self.y) + self.weights.l2 * beta

    def lipschitz_g(self, tol=1e-10) -> float:
        """Gradient Lipschitz constant lambda_max(X^T X) + l2, cached."""
        if self._lipschitz_g is None:
            from .linalg import largest_eigenvalue_sym

            lam = largest_eigenvalue_sym(
                lambda v: self.X.T @ (self.X @ v), self.p, tol
            )
            self._lipschitz_g = float(lam + self.weights.l2)
        return self._lipschitz_g

    # -- full objective ------------------------------------------------------

    def f_value(self, beta) -> float:
        beta = np.asarray(beta, dtype=np.float64).ravel()
        val = self.g_value(beta) + self.weights.l1 * float(np.abs(beta).sum())
        if self.weights.tv != 0 and self.op.n_rows > 0:
            val += self.weights.tv * float(self.op.group_norms(self.op.apply(beta)).sum())
        return val

    def f_mu_value(self, beta, mu) -> float:
        _check_mu(mu)
        beta = np.asarray(beta, dtype=np.float64).ravel()
        val = self.g_value(beta) + self.weights.l1 * float(np.abs(beta).sum())
        if self.weights.tv != 0 and self.op.n_rows > 0:
            a_beta = self.op.apply(beta)
            alpha, _ = dual_maximizer_from_product(self.op, a_beta, mu)
            val += self.weights.tv * float(alpha @ a_beta - 0.5 * mu * (alpha @ alpha))
        return val

    # -- duality -------------------------------------------------------------

    def dual_variable(self, beta) -> np.ndarray:
        """Plug-in dual point sigma(beta) = X beta - y."""
        beta = np.asarray(beta, dtype=np.float64).ravel()
        return self.X @ beta - self.y

    def fenchel_l_star(self, z) -> float:
        """Conjugate of the loss l(z) = 1/2 ||z - y||^2: 1/2 ||z||^2 + <z, y>."""
        z = np.asarray(z, dtype=np.float64).ravel()
        return float(0.5 * (z @ z) + z @ self.y)

    def fenchel_omega_star(self, z, beta, mu) -> float:
        """Conjugate of the penalties, linearised at alpha*(beta).

        (1 / 2 l2) * sum_j ([|z_j - tv (A^T alpha*)_j| - l1]_+)^2
        + (tv mu / 2) ||alpha*||^2.
        """
        _check_mu(mu)
        z = np.asarray(z, dtype=np.float64).ravel()
        w = self.weights
        if w.tv != 0 and self.op.n_rows > 0:
            alpha, _ = dual_maximizer_from_product(self.op, self.op.apply(beta), mu)
            z = z - w.tv * self.op.apply_transpose(alpha)
            tail = 0.5 * w.tv * mu * float(alpha @ alpha)
        else:
            tail = 0.0
        shrunk = np.maximum(np.abs(z) - w.l1, 0.0)
        return float((shrunk @ shrunk) / (2.0 * w.l2) + tail)

    def gap_mu(self, beta, mu) -> float:
        """Duality-gap certificate for the smoothed objective at beta."""
        return _gap_bundle(self, np.asarray(beta, dtype=np.float64).ravel(), mu)[0]

    def gap_nonsmooth_estimate(self, beta, mu) -> float:
        """gap_mu plus the smoothing offset mu * tv * M.

        Upper-bounds f(beta) - f(beta*) for the original non-smooth problem,
        for any mu.
        """
        gap = self.gap_mu(beta, mu)
        return gap + mu * self.weights.tv * m_constant(self.op)


def _gap_bundle(problem: Problem, beta, mu):
    """(gap_mu, f, f_mu) at beta with the matrix products shared.

    Hot path of every solver's stopping test: one product each with X, X^T,
    A and A^T.
    """
    _check_mu(mu)
    X, y, w, op = problem.X, problem.y, problem.weights, problem.op
    Xb = X @ beta
    resid = Xb - y
    g_val = 0.5 * float(resid @ resid) + 0.5 * w.l2 * float(beta @ beta)
    l1_norm = float(np.abs(beta).sum())

    if w.tv != 0 and op.n_rows > 0:
        a_beta = op.apply(beta)
        alpha, norms = dual_maximizer_from_product(op, a_beta, mu)
        s_exact = float(norms.sum())
        alpha_sq = float(alpha @ alpha)
        s_mu = float(alpha @ a_beta) - 0.5 * mu * alpha_sq
        struct_pull = w.tv * op.apply_transpose(alpha)
    else:
        s_exact = s_mu = alpha_sq = 0.0
        struct_pull = None

    f = g_val + w.l1 * l1_norm + w.tv * s_exact
    f_mu = g_val + w.l1 * l1_norm + w.tv * s_mu

    l_star = 0.5 * float(resid @ resid) + float(resid @ y)
    z = -(X.T @ resid)
    if struct_pull is not None:
        z = z - struct_pull
    shrunk = np.maximum(np.abs(z) - w.l1, 0.0)
    omega_star = float(shrunk @ shrunk) / (2.0 * w.l2) + 0.5 * w.tv * mu * alpha_sq

    return f_mu + l_star + omega_star, f, f_mu
