import numpy as np
import pytest

from conesta import (
    GridMask,
    PenaltyWeights,
    Problem,
    build_tv_operator,
)


def random_masked_tv_operator(rng, max_side=6):
    """Random 3D masked TV operator (at least one in-mask cell)."""
    dims = tuple(int(rng.integers(1, max_side + 1)) for _ in range(3))
    inside = rng.random(dims) < 0.7
    if not inside.any():
        inside.flat[int(rng.integers(inside.size))] = True
    return build_tv_operator(GridMask(inside))


def random_problem(rng, n=20, p=30, l1=0.3, l2=0.7, tv=1.1):
    """Random dense problem on a 1D chain."""
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    op = build_tv_operator(GridMask.chain(p))
    return Problem(X, y, PenaltyWeights(l1=l1, l2=l2, tv=tv), op)


@pytest.fixture
def rng():
    return np.random.default_rng(20140228)
