class DyadlabError(Exception):
    """Base class for library errors."""


class LevelOverflowError(DyadlabError, ValueError):
    """An interval is finer than the tree depth allows."""


class NotSPDError(DyadlabError, ValueError):
    """A matrix that must be positive definite is not (within tolerance)."""


class DimensionMismatchError(DyadlabError, ValueError):
    """Grid objects disagree on depth or matrix dimension."""


class InvariantViolation(DyadlabError):
    """A checked inequality failed on a concrete instance."""

    def __init__(self, name: str, value: float, bound: float, detail: str = ""):
        self.name = name
        self.value = value
        self.bound = bound
        self.detail = detail
        msg = f"{name}: {value!r} violates bound {bound!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
