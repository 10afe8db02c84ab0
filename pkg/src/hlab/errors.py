"""Exception types raised across the package."""


class HlabError(Exception):
    """Base class for every error raised by hlab."""


class InputError(HlabError, ValueError):
    """Malformed or mismatched input (dimensions, spaces, empty clouds)."""


class ResourceError(HlabError, MemoryError):
    """A construction would exceed the configured cell budget."""

    def __init__(self, requested, limit, what="cells"):
        self.requested = requested
        self.limit = limit
        super().__init__(
            f"{what}: requested {requested} exceeds budget {limit} "
            f"(raise HLAB_BUDGET_CELLS to allow more)"
        )


class DomainError(HlabError, ValueError):
    """A point lies outside the domain of a partially defined map."""


class PreconditionError(HlabError, ValueError):
    """An operation precondition failed, e.g. a function outside the ideal."""


class UnsupportedError(HlabError, NotImplementedError):
    """The requested check or construction does not apply to this system."""


class NumericalError(HlabError, ArithmeticError):
    """An iterative method failed to converge.

    ``last_iterate`` carries the final vector so callers can inspect it.
    """

    def __init__(self, message, last_iterate=None, estimate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.estimate = estimate
