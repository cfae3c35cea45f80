"""Smooth surrogates for group-norm penalties.

For s(beta) = sum_g ||A_g beta||_2, the surrogate with parameter mu > 0 is

    s_mu(beta) = max_{||alpha_g||_2 <= 1} <alpha, A beta> - mu/2 ||alpha||^2,

maximised by the per-group projection of A_g beta / mu onto the unit ball.
s_mu is convex and differentiable with gradient A^T alpha*(beta), the
gradient is (||A||_2^2 / mu)-Lipschitz, and

    s_mu(beta) <= s(beta) <= s_mu(beta) + mu * M

with M = (number of nonempty groups) / 2, since each nonempty group can
contribute at most 1/2 to max ||alpha||^2 / 2 over the product of unit balls.
"""

from dataclasses import dataclass, field

import numpy as np

from .operators import LinearStructureOperator

__all__ = [
    "MU_MIN",
    "SmoothedPenalty",
    "project_group",
    "alpha_star",
    "s_value",
    "s_mu_value",
    "grad_s_mu",
    "lipschitz_step",
    "m_constant",
]

# Smallest accepted smoothing parameter; the projection clamps every dual
# block at unit norm, which keeps all downstream expressions bounded even at
# this scale, but values below it are rejected outright.
MU_MIN = 1e-12


def _check_mu(mu):
    if not mu >= MU_MIN:
        raise ValueError(f"smoothing parameter must be >= {MU_MIN}, got {mu}")


def project_group(v) -> np.ndarray:
    """Project one group block onto the Euclidean unit ball."""
    v = np.asarray(v, dtype=np.float64)
    nrm = np.linalg.norm(v)
    if nrm <= 1.0:
        return v
    return v / nrm


def project_rows(op: LinearStructureOperator, r) -> np.ndarray:
    """Per-group unit-ball projection of a full row-space vector."""
    r = np.asarray(r, dtype=np.float64).ravel()
    norms = op.group_norms(r)
    scale = np.ones_like(norms)
    np.divide(1.0, norms, out=scale, where=norms > 1.0)
    if op.n_rows == 0:
        return r
    return r * scale[op._group_of_row]


def dual_maximizer_from_product(op, a_beta, mu):
    """Dual maximiser alpha* given the precomputed product A beta.

    Returns (alpha, group_norms_of_a_beta) so callers evaluating several
    quantities at once do not repeat the sparse products.
    """
    if op.n_rows == 0:
        return np.zeros(0), op.group_norms(a_beta)
    if op._single_row_groups:
        # One row per (nonempty) group: the block norm is the entry magnitude
        # and the projection reduces to alpha_r = r / max(|r|, mu).
        mags = np.abs(a_beta)
        alpha = a_beta / np.maximum(mags, mu)
        norms = np.zeros(op.n_groups)
        norms[op._group_of_row] = mags
        return alpha, norms
    norms = op.group_norms(a_beta)
    scale = np.full(norms.shape, 1.0 / mu)
    big = norms > mu
    np.divide(1.0, norms, out=scale, where=big)
    return a_beta * scale[op._group_of_row], norms


def alpha_star(op: LinearStructureOperator, beta, mu) -> np.ndarray:
    """Maximiser of the smoothed dual: per-group projection of A_g beta / mu."""
    _check_mu(mu)
    alpha, _ = dual_maximizer_from_product(op, op.apply(beta), mu)
    return alpha


def s_value(op: LinearStructureOperator, beta) -> float:
    """Exact penalty value sum_g ||A_g beta||_2."""
    return float(op.group_norms(op.apply(beta)).sum())


def s_mu_value(op: LinearStructureOperator, beta, mu) -> float:
    """Smoothed penalty value <alpha*, A beta> - mu/2 ||alpha*||^2."""
    _check_mu(mu)
    a_beta = op.apply(beta)
    alpha, _ = dual_maximizer_from_product(op, a_beta, mu)
    return float(alpha @ a_beta - 0.5 * mu * (alpha @ alpha))


def grad_s_mu(op: LinearStructureOperator, beta, mu) -> np.ndarray:
    """Gradient of the smoothed penalty, A^T alpha*(beta)."""
    return op.apply_transpose(alpha_star(op, beta, mu))


def m_constant(op: LinearStructureOperator) -> float:
    """Dual-ball size constant: (number of nonempty groups) / 2."""
    return op.n_nonempty_groups / 2.0


def lipschitz_step(op: LinearStructureOperator, mu, gamma, lipschitz_g) -> float:
    """Step length 1 / (L_g + gamma * ||A||_2^2 / mu) for the smoothed gradient."""
    _check_mu(mu)
    if lipschitz_g < 0:
        raise ValueError("lipschitz_g must be nonnegative")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    denom = float(lipschitz_g)
    if gamma > 0:
        denom += gamma * op.spectral_norm() ** 2 / mu
    if denom <= 0:
        raise ValueError("zero curvature: no valid step length")
    return 1.0 / denom


@dataclass
class SmoothedPenalty:
    """A group-norm penalty with a fixed smoothing parameter.

    Thin convenience wrapper over the module functions; ``M`` is the constant
    in the approximation bound s_mu <= s <= s_mu + mu * M.
    """

    operator: LinearStructureOperator
    mu: float
    M: float = field(init=False)

    def __post_init__(self):
        _check_mu(self.mu)
        self.M = m_constant(self.operator)

    def value(self, beta) -> float:
        return s_mu_value(self.operator, beta, self.mu)

    def exact_value(self, beta) -> float:
        return s_value(self.operator, beta)

    def grad(self, beta) -> np.ndarray:
        return grad_s_mu(self.operator, beta, self.mu)

    def alpha(self, beta) -> np.ndarray:
        return alpha_star(self.operator, beta, self.mu)
