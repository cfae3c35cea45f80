import numpy as np
import numpy.testing as npt
import pytest

from conesta import (
    GridMask,
    SmoothedPenalty,
    alpha_star,
    build_tv_operator,
    grad_s_mu,
    lipschitz_step,
    m_constant,
    project_group,
    s_mu_value,
    s_value,
)
from conesta.smoothing import MU_MIN
from conftest import random_masked_tv_operator


def two_point_op():
    return build_tv_operator(GridMask.chain(2))


class TestProjection:

    def test_inside_ball_unchanged(self):
        npt.assert_array_equal(project_group([0.3, 0.4]), [0.3, 0.4])

    def test_normalized(self):
        npt.assert_allclose(project_group([3.0, 4.0]), [0.6, 0.8], rtol=1e-15)

    def test_zero_fixed_point(self):
        npt.assert_array_equal(project_group(np.zeros(3)), np.zeros(3))

    def test_unit_norm_boundary_unchanged(self):
        v = np.array([1.0, 0.0])
        npt.assert_array_equal(project_group(v), v)


class TestAlphaStar:

    def test_zero_beta(self):
        op = two_point_op()
        npt.assert_array_equal(alpha_star(op, np.zeros(2), 0.5), np.zeros(1))

    def test_clipping_example(self):
        npt.assert_allclose(alpha_star(two_point_op(), [0.0, 2.0], 1.0), [1.0])

    def test_no_clip_when_mu_large(self, rng):
        op = random_masked_tv_operator(rng)
        beta = rng.standard_normal(op.n_cols)
        a_beta = op.apply(beta)
        mu = float(op.group_norms(a_beta).max()) + 1.0
        npt.assert_allclose(alpha_star(op, beta, mu), a_beta / mu, rtol=1e-12)

    def test_feasibility(self, rng):
        for _ in range(10):
            op = random_masked_tv_operator(rng)
            beta = 10.0 * rng.standard_normal(op.n_cols)
            mu = 10.0 ** rng.uniform(-8, 1)
            alpha = alpha_star(op, beta, mu)
            assert op.group_norms(alpha).max(initial=0.0) <= 1.0 + 1e-12

    def test_mu_floor(self):
        op = two_point_op()
        with pytest.raises(ValueError):
            alpha_star(op, [0.0, 1.0], 1e-13)
        with pytest.raises(ValueError):
            s_mu_value(op, [0.0, 1.0], 0.0)


class TestValues:

    def test_worked_example(self):
        op = two_point_op()
        beta = [0.0, 2.0]
        assert s_mu_value(op, beta, 1.0) == pytest.approx(1.5, abs=1e-15)
        assert s_value(op, beta) == pytest.approx(2.0, abs=1e-15)
        assert m_constant(op) == 0.5
        # sandwich at this point: 1.5 <= 2 <= 1.5 + 1*0.5
        assert s_mu_value(op, beta, 1.0) <= s_value(op, beta) \
            <= s_mu_value(op, beta, 1.0) + 1.0 * m_constant(op)

    def test_constant_beta_tv_zero(self, rng):
        op = build_tv_operator(GridMask.full((3, 3)))
        assert s_value(op, np.full(9, 2.7)) == 0.0

    def test_homogeneity(self, rng):
        op = random_masked_tv_operator(rng)
        beta = rng.standard_normal(op.n_cols)
        s = s_value(op, beta)
        for c in (-3.0, 0.25):
            assert s_value(op, c * beta) == pytest.approx(abs(c) * s, rel=1e-12)

    def test_sandwich_1000_draws(self, rng):
        for _ in range(10):
            op = random_masked_tv_operator(rng)
            M = m_constant(op)
            for _ in range(100):
                beta = 5.0 * rng.standard_normal(op.n_cols)
                mu = 10.0 ** rng.uniform(-6, 1)
                s = s_value(op, beta)
                smu = s_mu_value(op, beta, mu)
                slack = 1e-12 * (1.0 + s)
                assert smu <= s + slack
                assert s <= smu + mu * M + slack

    def test_s_mu_approaches_s(self, rng):
        op = random_masked_tv_operator(rng)
        beta = rng.standard_normal(op.n_cols)
        M = m_constant(op)
        s = s_value(op, beta)
        for mu in (1e-2, 1e-5, 1e-8):
            assert abs(s - s_mu_value(op, beta, mu)) <= mu * M + 1e-12

    def test_monotone_in_mu(self, rng):
        op = random_masked_tv_operator(rng)
        beta = rng.standard_normal(op.n_cols)
        mus = np.logspace(-8, 1, 12)
        vals = [s_mu_value(op, beta, mu) for mu in mus]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


class TestGradient:

    def test_zero_beta(self):
        op = two_point_op()
        npt.assert_array_equal(grad_s_mu(op, np.zeros(2), 0.3), np.zeros(2))

    def test_finite_differences(self, rng):
        # central differences, step 1e-5, on a random 1D problem with p = 20
        op = build_tv_operator(GridMask.chain(20))
        beta = rng.standard_normal(20)
        mu = 0.1
        grad = grad_s_mu(op, beta, mu)
        h = 1e-5
        fd = np.zeros(20)
        for j in range(20):
            ej = np.zeros(20)
            ej[j] = h
            fd[j] = (s_mu_value(op, beta + ej, mu) - s_mu_value(op, beta - ej, mu)) / (2 * h)
        denom = max(1.0, np.abs(grad).max())
        assert np.abs(fd - grad).max() / denom <= 1e-5

    def test_gradient_lipschitz_bound(self, rng):
        op = random_masked_tv_operator(rng)
        norm_sq = op.spectral_norm(tol=1e-10) ** 2
        for mu in (0.05, 1.0):
            for _ in range(20):
                b1 = rng.standard_normal(op.n_cols)
                b2 = rng.standard_normal(op.n_cols)
                lhs = np.linalg.norm(grad_s_mu(op, b1, mu) - grad_s_mu(op, b2, mu))
                rhs = norm_sq / mu * np.linalg.norm(b1 - b2)
                assert lhs <= rhs * (1.0 + 1e-9) + 1e-12


class TestStepAndM:

    def test_step_no_penalty(self):
        assert lipschitz_step(two_point_op(), 1.0, 0.0, 1.0) == 1.0

    def test_step_worked_example(self):
        # L_g = 1, gamma = 1, ||A||^2 = 4, mu = 2 -> 1/3
        op = build_tv_operator(GridMask.chain(10))
        op._spectral_norm = 2.0
        assert lipschitz_step(op, 2.0, 1.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_step_monotone_in_mu(self):
        op = build_tv_operator(GridMask.chain(10))
        steps = [lipschitz_step(op, mu, 1.5, 2.0) for mu in (0.01, 0.1, 1.0, 10.0)]
        assert all(a < b for a, b in zip(steps, steps[1:]))

    def test_step_errors(self):
        op = two_point_op()
        with pytest.raises(ValueError):
            lipschitz_step(op, 0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            lipschitz_step(op, 1.0, 1.0, -1.0)

    def test_m_constant_chain(self):
        assert m_constant(build_tv_operator(GridMask.chain(3))) == 1.0

    def test_m_constant_3d_bound(self):
        op = build_tv_operator(GridMask.full((3, 3, 3)))
        assert m_constant(op) <= 27 / 2

    def test_m_constant_zero_rows(self):
        assert m_constant(build_tv_operator(GridMask.chain(1))) == 0.0


class TestSmoothedPenaltyWrapper:

    def test_delegates(self, rng):
        op = random_masked_tv_operator(rng)
        pen = SmoothedPenalty(op, 0.2)
        beta = rng.standard_normal(op.n_cols)
        assert pen.value(beta) == s_mu_value(op, beta, 0.2)
        assert pen.exact_value(beta) == s_value(op, beta)
        npt.assert_array_equal(pen.grad(beta), grad_s_mu(op, beta, 0.2))
        assert pen.M == m_constant(op)

    def test_rejects_small_mu(self, rng):
        op = random_masked_tv_operator(rng)
        with pytest.raises(ValueError):
            SmoothedPenalty(op, MU_MIN / 2)
