"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` used by the command-line front end:
2 for bad input/configuration, 3 for numerical non-convergence and 4 for
model infeasibility.
"""


class PhaseShockError(Exception):
    exit_code = 3


class ConfigError(PhaseShockError, ValueError):
    exit_code = 2


class DomainError(PhaseShockError, ValueError):
    """A volume (or other argument) lies outside the admissible domain."""

    exit_code = 2


class ConvergenceError(PhaseShockError, RuntimeError):
    exit_code = 3


class NoRootError(ConvergenceError):
    """The state surface is not reachable for the requested (P, T)."""


class BranchCountError(PhaseShockError, ValueError):
    """The isotherm does not have the number of branches an operation needs."""

    exit_code = 4


class NoTransitionError(PhaseShockError, ValueError):
    """No two-phase region exists at the requested temperature."""

    exit_code = 4


class DegenerateError(PhaseShockError, ValueError):
    exit_code = 4


class ComplexSigmaError(PhaseShockError, ValueError):
    """The matching constant would be complex; no bounded universal regime."""

    exit_code = 4


class TieError(PhaseShockError, ValueError):
    """Two saddle points are co-dominant (the point lies on the shock line)."""

    exit_code = 4


class IllPosedError(PhaseShockError, ValueError):
    exit_code = 4


class InstabilityError(ConvergenceError):
    pass


class KernelTruncationError(ConvergenceError):
    pass


class QuadratureError(ConvergenceError):
    pass


class SingularSystemError(PhaseShockError, ValueError):
    exit_code = 4


class ExtrapolationError(PhaseShockError, ValueError):
    exit_code = 2


class NoIntersectionError(PhaseShockError, ValueError):
    exit_code = 4


class WindowWarning(UserWarning):
    """Evaluation outside the window where the asymptotic form is trusted."""
