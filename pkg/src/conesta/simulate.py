"""Synthetic regression datasets whose exact minimiser is known.

The generator draws a candidate design matrix from a constant-correlation
Gaussian model, a sparse nondecreasing target vector beta* and a residual of
prescribed norm, then rescales (and possibly sign-flips) each column of the
candidate matrix so that beta* satisfies the first-order optimality
conditions of the penalised objective exactly with y = X beta* - e.  The
subgradient choices are canonical (normalised group blocks where the
structure term is active, zero elsewhere; half the available l1 slack on the
inactive coordinates), which makes the construction verifiable by an
independent KKT residual check.

Columns are handled independently: for a nonzero coordinate the stationarity
equation pins the scale, for a zero coordinate any scale keeping the
subgradient inside the l1 ball works and a bounded one is chosen.  Residual
draws whose column correlations are too close to orthogonal are rejected and
redrawn (they would force huge column scales and an ill-conditioned X).

RNG discipline: one seed sequence per dataset, split into four child streams
(correlation draw, candidate matrix, beta*, residual); residual redraw
attempt t uses the t-th child of the residual stream.  Identical designs
produce bit-identical datasets.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CalibrationError
from .objective import PenaltyWeights, Problem
from .operators import GridMask, LinearStructureOperator, build_tv_operator

__all__ = [
    "CORRELATION_DISPERSION",
    "SimulationDesign",
    "LabeledDataset",
    "draw_candidate",
    "calibrate_columns",
    "assemble",
    "generate_dataset",
    "load_dataset",
    "verify_kkt",
    "error_to_optimum",
]

CORRELATION_DISPERSION = {"low": 1.0, "medium": 4.5, "high": 8.0}

FORMAT_VERSION = 1

_DEFAULT_L1 = 0.618

# Residual quality guard: min_j |x0_j . e| must exceed this fraction of the
# median, otherwise some column scale blows up; see module docstring.
_MIN_COLUMN_QUALITY = 5e-3
_MAX_RESIDUAL_REDRAWS = 10


def _default_weights() -> PenaltyWeights:
    return PenaltyWeights(l1=_DEFAULT_L1, l2=1.0 - _DEFAULT_L1, tv=1.618)


@dataclass(frozen=True)
class SimulationDesign:
    """Design of one simulated dataset.

    correlation picks the dispersion of the constant correlation rho, drawn
    once per dataset from N(0, (d_c / sqrt(n))^2) with d_c in {1, 4.5, 8}
    for low/medium/high.  sparsity is the fraction of zero coefficients.
    snr fixes the residual norm: ||e||_2 = 1 / snr.
    """

    n: int
    p: int
    correlation: str = "low"
    sparsity: float = 0.5
    snr: float = 0.5
    seed: int = 0
    weights: PenaltyWeights = field(default_factory=_default_weights)

    def __post_init__(self):
        if self.n < 2 or self.p < 2:
            raise ValueError("need n >= 2 and p >= 2")
        if self.correlation not in CORRELATION_DISPERSION:
            raise ValueError(f"correlation must be one of {sorted(CORRELATION_DISPERSION)}")
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError("sparsity must lie in [0, 1)")
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "correlation": self.correlation,
            "sparsity": self.sparsity,
            "snr": self.snr,
            "seed": self.seed,
        }


@dataclass
class LabeledDataset:
    """Simulated dataset with its exact minimiser and optimal value."""

    X: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    e: np.ndarray
    weights: PenaltyWeights
    op: LinearStructureOperator
    f_star: float = np.nan
    kkt_residual: float = np.inf
    design: SimulationDesign | None = None
    _problem: Problem | None = field(default=None, repr=False, compare=False)

    def problem(self) -> Problem:
        if self._problem is None:
            self._problem = Problem(self.X, self.y, self.weights, self.op)
        return self._problem

    def save(self, directory) -> None:
        """Write the on-disk layout: X/y/beta_star/e CSVs plus meta.json."""
        if self.design is None:
            raise ValueError("cannot save a dataset without its design")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _write_csv(directory / "X.csv", self.X)
        _write_csv(directory / "y.csv", self.y)
        _write_csv(directory / "beta_star.csv", self.beta_star)
        _write_csv(directory / "e.csv", self.e)
        meta = {
            "format_version": FORMAT_VERSION,
            "design": self.design.to_dict(),
            "weights": {
                "l1": self.weights.l1,
                "l2": self.weights.l2,
                "tv": self.weights.tv,
            },
            "f_star": self.f_star,
            "kkt_residual": self.kkt_residual,
            "snr_definition": "residual scaled so that norm2(e) = 1/snr",
        }
        with open(directory / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_csv(path, arr) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    if arr.shape[0] == 1 and arr.shape[1] > 1:
        arr = arr.T
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def load_dataset(directory) -> LabeledDataset:
    """Load a dataset directory written by :meth:`LabeledDataset.save`."""
    directory = Path(directory)
    with open(directory / "meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    weights = PenaltyWeights(**meta["weights"])
    design = SimulationDesign(weights=weights, **meta["design"])
    X = _read_csv(directory / "X.csv")
    y = _read_csv(directory / "y.csv").ravel()
    beta_star = _read_csv(directory / "beta_star.csv").ravel()
    e = _read_csv(directory / "e.csv").ravel()
    op = build_tv_operator(GridMask.chain(design.p))
    return LabeledDataset(X, y, beta_star, e, weights, op,
                          f_star=float(meta["f_star"]),
                          kkt_residual=float(meta["kkt_residual"]),
                          design=design)


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(4)
    return {
        "rho": np.random.Generator(np.random.PCG64(children[0])),
        "X0": np.random.Generator(np.random.PCG64(children[1])),
        "beta": np.random.Generator(np.random.PCG64(children[2])),
        "e_attempts": children[3].spawn(_MAX_RESIDUAL_REDRAWS + 1),
    }


def draw_candidate(design: SimulationDesign):
    """Draw (X0, beta_star, e) for the given design.

    X0 has rows from N(1, Sigma) with Sigma the constant-correlation matrix
    (unit diagonal, off-diagonal rho, rho clamped into the positive
    semidefinite range).  beta_star has round(sparsity * p) zeros at the
    head and uniform(0, 1) entries sorted ascending on the tail.  e comes
    from N(1, 1) rescaled to norm 1/snr.
    """
    streams = _streams(design.seed)
    X0, beta_star = _draw_design_matrix_and_beta(design, streams)
    e = _draw_residual(design, streams["e_attempts"][0])
    return X0, beta_star, e


def _draw_design_matrix_and_beta(design, streams):
    n, p = design.n, design.p
    d_c = CORRELATION_DISPERSION[design.correlation]
    lo = -1.0 / (p - 1) + 1e-6
    hi = 0.99
    if lo >= hi:
        raise CalibrationError("correlation clamp range is empty for this p")
    rho = float(np.clip(streams["rho"].normal(0.0, d_c / np.sqrt(n)), lo, hi))

    # Sample N(1, Sigma) through the symmetric square root of the constant
    # correlation matrix: sqrt(1-rho) off the all-ones direction and
    # sqrt(1-rho+p*rho) along it.
    Z = streams["X0"].standard_normal((n, p))
    row_mean = Z.mean(axis=1, keepdims=True)
    X0 = 1.0 + np.sqrt(1.0 - rho) * (Z - row_mean) + np.sqrt(1.0 - rho + p * rho) * row_mean

    n_zero = int(np.rint(design.sparsity * p))
    beta_star = np.zeros(p)
    beta_star[n_zero:] = np.sort(streams["beta"].uniform(0.0, 1.0, size=p - n_zero))
    return X0, beta_star


def _draw_residual(design, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    e = 1.0 + rng.standard_normal(design.n)
    return e * ((1.0 / design.snr) / np.linalg.norm(e))


def _structure_pull(op, beta_star, tv):
    """Canonical structure subgradient tv * A^T alpha0 at beta_star.

    alpha0 normalises the group blocks of A beta* where they are nonzero and
    is zero on the others.
    """
    if tv == 0 or op.n_rows == 0:
        return np.zeros(op.n_cols)
    a_beta = op.apply(beta_star)
    norms = op.group_norms(a_beta)
    scale = np.zeros_like(norms)
    np.divide(1.0, norms, out=scale, where=norms > 0)
    alpha0 = a_beta * scale[op._group_of_row]
    return tv * op.apply_transpose(alpha0)


def calibrate_columns(X0, beta_star, e, weights: PenaltyWeights,
                      op: LinearStructureOperator) -> np.ndarray:
    """Rescale and sign-flip the columns of X0 so beta* is optimal.

    With y = X beta* - e the loss gradient at beta* is X^T e, so column j
    must satisfy

        omega_j * (x0_j . e) + l2 beta*_j + l1 sign(beta*_j) + b_j = 0

    on the support (b = tv * A^T alpha0 the canonical structure
    subgradient), and |omega_j * (x0_j . e) + b_j| <= l1 off it, enforced
    here with half the available slack.  Raises CalibrationError when a zero
    coordinate cannot be stationary (requires l1 > 0 unless the structure
    term covers it).
    """
    X0 = np.asarray(X0, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64).ravel()
    e = np.asarray(e, dtype=np.float64).ravel()
    p = beta_star.size
    c = X0.T @ e
    if np.any(c == 0.0):
        raise CalibrationError("residual orthogonal to a candidate column")

    b = _structure_pull(op, beta_star, weights.tv)
    slack = 0.5 * weights.l1
    omega = np.empty(p)
    flip = np.ones(p)
    for j in range(p):
        cj = c[j]
        if beta_star[j] != 0.0:
            rhs = -(weights.l2 * beta_star[j]
                    + weights.l1 * np.sign(beta_star[j]) + b[j])
            if rhs == 0.0:
                raise CalibrationError(
                    f"column {j}: stationarity needs a zero scale; "
                    "perturb the penalty weights"
                )
            w_j = rhs / cj
        else:
            sign_away = -np.sign(b[j]) if b[j] != 0.0 else 1.0
            target = slack * sign_away
            if target == b[j]:
                raise CalibrationError(
                    f"column {j}: a zero coordinate cannot be made stationary; "
                    "increase l1 or decrease tv"
                )
            w_j = (target - b[j]) / cj
            if abs(b[j]) < slack:
                # Inactive coordinate with room to spare: any scale up to the
                # slack works, keep it on the same footing as the others.
                w_j = np.sign(w_j) * min(abs(w_j), 1.0)
        if w_j < 0:
            flip[j] = -1.0
            w_j = -w_j
        omega[j] = w_j
    return X0 * (flip * omega)


def assemble(X, beta_star, e, weights: PenaltyWeights,
             op: LinearStructureOperator,
             design: SimulationDesign | None = None) -> LabeledDataset:
    """Assemble the dataset around a calibrated X.

    y = X beta* - e; the residual is then re-derived as X beta* - y so the
    stored arrays satisfy the identity exactly under recomputation.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64).ravel()
    Xb = X @ beta_star
    y = Xb - np.asarray(e, dtype=np.float64).ravel()
    e_exact = Xb - y
    ds = LabeledDataset(X, y, beta_star, e_exact, weights, op, design=design)
    ds.f_star = ds.problem().f_value(beta_star)
    ds.kkt_residual = verify_kkt(ds)
    return ds


def generate_dataset(design: SimulationDesign) -> LabeledDataset:
    """Draw, calibrate and assemble one dataset; deterministic in the design."""
    streams = _streams(design.seed)
    X0, beta_star = _draw_design_matrix_and_beta(design, streams)
    op = build_tv_operator(GridMask.chain(design.p))

    e = None
    for attempt_seed in streams["e_attempts"]:
        candidate = _draw_residual(design, attempt_seed)
        c = X0.T @ candidate
        abs_c = np.abs(c)
        if abs_c.min() > _MIN_COLUMN_QUALITY * np.median(abs_c):
            e = candidate
            break
    if e is None:
        raise CalibrationError(
            "no residual draw kept the column correlations away from zero; "
            "try another seed"
        )
    X = calibrate_columns(X0, beta_star, e, design.weights, op)
    ds = assemble(X, beta_star, e, design.weights, op, design)
    if not np.isfinite(ds.f_star):
        raise CalibrationError("calibrated dataset has a non-finite optimum")
    return ds


def verify_kkt(dataset: LabeledDataset, tol=None) -> float:
    """Independent first-order optimality residual at beta*.

    Evaluates r = X^T (X beta* - y) + l2 beta* + tv A^T alpha0 with the
    canonical structure subgradient and returns the largest coordinatewise
    violation: |r_j + l1 sign(beta*_j)| on the support, the distance of
    -r_j to [-l1, l1] off it.  When ``tol`` is given, raises
    CalibrationError if the residual exceeds it.
    """
    problem = dataset.problem()
    w = dataset.weights
    beta = dataset.beta_star
    r = problem.X.T @ (problem.X @ beta - problem.y) + w.l2 * beta
    r = r + _structure_pull(dataset.op, beta, w.tv)
    on_support = beta != 0.0
    viol = np.where(
        on_support,
        np.abs(r + w.l1 * np.sign(beta)),
        np.maximum(np.abs(r) - w.l1, 0.0),
    )
    residual = float(viol.max()) if viol.size else 0.0
    if tol is not None and residual > tol:
        raise CalibrationError(f"KKT residual {residual:.3e} exceeds {tol:.3e}")
    return residual


def error_to_optimum(dataset: LabeledDataset, beta) -> float:
    """f(beta) - f(beta*); nonnegative up to floating-point slack."""
    return dataset.problem().f_value(beta) - dataset.f_star
