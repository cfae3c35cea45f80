"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons (as opposed to bad input)."""


class CalibrationError(NumericalError):
    """Dataset calibration could not satisfy the optimality conditions."""
