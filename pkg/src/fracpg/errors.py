"""Shared exception types."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or lost too much accuracy.

    Raised when quadrature refinement stalls, an eigensolver or iterative
    linear solver does not reach its tolerance, and similar situations where
    the inputs were valid but the computation could not be completed reliably.
    """
