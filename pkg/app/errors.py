"""Exception hierarchy shared by services, the CLI and the HTTP routers."""
from typing import Optional


class HardyToolkitError(Exception):
    """Base class for toolkit failures"""


class SingularPointError(HardyToolkitError, ValueError):
    """Point lies on the deepest singular subspace"""


class PreconditionError(HardyToolkitError, ValueError):
    """An operation precondition does not hold"""


class DivergenceError(HardyToolkitError, ArithmeticError):
    """Integrand has a non-integrable power-law singularity"""


class ConsistencyError(HardyToolkitError, ArithmeticError):
    """Two independent evaluations of a closed form disagree"""


class QuadratureBudgetError(HardyToolkitError, RuntimeError):
    """Tolerance not reached within the subdivision budget.

    The best available estimate is kept on the exception.
    """

    def __init__(self, msg: str, value=None, abs_error_estimate: Optional[float] = None):
        super().__init__(msg)
        self.value = value
        self.abs_error_estimate = abs_error_estimate


class ConvergenceError(HardyToolkitError, RuntimeError):
    """Inverse iteration did not reach the residual tolerance.

    ``estimate`` holds the last iterate's EigEstimate.
    """

    def __init__(self, msg: str, estimate=None):
        super().__init__(msg)
        self.estimate = estimate
