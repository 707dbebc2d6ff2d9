"""Exception taxonomy shared across the package.

Parameter-validation failures raise plain ``ValueError`` like the rest of the
scientific Python ecosystem; the classes below mark failures that callers (in
particular the CLI) need to tell apart.
"""


class PggmError(Exception):
    """Base class for package-specific failures."""


class DataError(PggmError):
    """Malformed input data (CSV/JSON parsing, dimension mismatches)."""


class NumericalError(PggmError):
    """A numerical routine failed (non-SPD matrix, overflow guard, ...)."""


class NoConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""


class EmptyChainError(PggmError):
    """A posterior summary was requested from a chain with no retained draws."""


class ChainAbortError(NumericalError):
    """A chain died mid-run; carries the partial output and the failing sweep."""

    def __init__(self, message: str, sweep: int, partial=None):
        super().__init__(message)
        self.sweep = sweep
        self.partial = partial
