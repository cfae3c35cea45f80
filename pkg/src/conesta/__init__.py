"""Regression with elastic-net and structured penalties.

Solvers for

    min_beta 1/2 ||X beta - y||^2 + l2/2 ||beta||^2 + l1 ||beta||_1
             + tv * sum_g ||A_g beta||_2

where the structure operator A encodes total variation on a masked grid or
(possibly overlapping) feature groups.  The structured term is handled by
Nesterov smoothing; the flagship solver, CONESTA, drives the smoothing
parameter with duality-gap estimates of the distance to the optimum, so a
single target precision is the only tuning knob.
"""

from .errors import CalibrationError, NumericalError
from .objective import PenaltyWeights, Problem, prox_l1
from .operators import (
    GridMask,
    LinearStructureOperator,
    build_group_lasso_operator,
    build_tv_operator,
    read_mask_file,
    write_mask_file,
)
from .simulate import (
    LabeledDataset,
    SimulationDesign,
    calibrate_columns,
    draw_candidate,
    error_to_optimum,
    generate_dataset,
    load_dataset,
    verify_kkt,
)
from .smoothing import (
    SmoothedPenalty,
    alpha_star,
    grad_s_mu,
    lipschitz_step,
    m_constant,
    project_group,
    s_mu_value,
    s_value,
)
from .solvers import (
    SolverConfig,
    SolverResult,
    SolverTrace,
    conesta,
    fista,
    fista_fixed_mu,
    inexact_fista,
    mu_optimal,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "NumericalError",
    "PenaltyWeights",
    "Problem",
    "prox_l1",
    "GridMask",
    "LinearStructureOperator",
    "build_group_lasso_operator",
    "build_tv_operator",
    "read_mask_file",
    "write_mask_file",
    "LabeledDataset",
    "SimulationDesign",
    "calibrate_columns",
    "draw_candidate",
    "error_to_optimum",
    "generate_dataset",
    "load_dataset",
    "verify_kkt",
    "SmoothedPenalty",
    "alpha_star",
    "grad_s_mu",
    "lipschitz_step",
    "m_constant",
    "project_group",
    "s_mu_value",
    "s_value",
    "SolverConfig",
    "SolverResult",
    "SolverTrace",
    "conesta",
    "fista",
    "fista_fixed_mu",
    "inexact_fista",
    "mu_optimal",
]
