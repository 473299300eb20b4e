"""Exception hierarchy shared by the solvers."""


class StrongLDError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(StrongLDError, ValueError):
    """An input vector or matrix does not match the field dimension."""


class GridMismatchError(StrongLDError, ValueError):
    """Two objects that must share a time grid do not."""


class OutOfRangeError(StrongLDError, ValueError):
    """A requested time lies outside a recorded path."""


class DivergenceError(StrongLDError, ArithmeticError):
    """A trajectory left the finite floating point range.

    Attributes
    ----------
    node : int
        Index of the first grid node whose state is not finite.
    """

    def __init__(self, node, message=None):
        self.node = int(node)
        super().__init__(message or f"trajectory diverged at node {self.node}")


class EstimationError(StrongLDError, RuntimeError):
    """A Monte Carlo estimate could not be formed (e.g. every path diverged)."""
