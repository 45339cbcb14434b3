"""Exception types shared across the package.

The CLI maps these onto exit codes: :class:`DataError` -> 2,
:class:`NumericalError` (and subclasses) -> 3.
"""


class DataError(ValueError):
    """Input data cannot be used (too short, degenerate, malformed)."""


class NumericalError(ArithmeticError):
    """A numerical stage failed (instability, no convergence)."""


class NonStationaryError(NumericalError, ValueError):
    """A model has a root on or inside the unit circle."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""
