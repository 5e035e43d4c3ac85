"""Exception hierarchy shared across the simulator.

The CLI maps these onto exit codes: validation problems exit with 1 and
numerical failures with 2 (gradient-check failures use 3).
"""


class SimulatorError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SimulatorError):
    """Invalid input, configuration, or violated precondition."""


class InsufficientPilotsError(ValidationError):
    """Pilot length too short for the requested estimator (singular Gram)."""


class NumericalError(SimulatorError):
    """Conditioning or convergence failure during a numerical routine."""


class QuadratureError(NumericalError):
    """Correlation-matrix quadrature did not converge under node doubling."""
