"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems are validation
errors, everything numeric or geometric is a runtime failure.
"""


class UavCompError(Exception):
    """Base class for package errors."""


class ConfigError(UavCompError, ValueError):
    """Invalid user-supplied parameter or configuration key."""


class DomainError(UavCompError, ValueError):
    """Argument outside the domain of a mathematical function."""


class NumericError(UavCompError, ArithmeticError):
    """A series, iteration or quadrature failed to converge."""


class DegenerateInputError(UavCompError, ValueError):
    """Geometric input too degenerate for the requested construction."""


class InsufficientDeploymentError(UavCompError, ValueError):
    """Too few UAVs in a realization to form a CoMP set."""


class NoInterferenceError(UavCompError, ValueError):
    """SIR requested for a realization without any interfering UAV."""


class GraphConfigurationError(ConfigError):
    """Communication graph or pinning gains make the control problem ill-posed."""


class AssumptionViolationError(ConfigError):
    """A stability assumption (e.g. positive q = (L+B)^{-1} 1) does not hold."""
