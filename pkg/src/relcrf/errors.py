"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RelCrfError(Exception):
    """Base class for every error raised by relcrf."""


class EdgeIndexError(RelCrfError, ValueError):
    """An (t, from_label, to_label) triple or flat index is not valid."""


class DimensionError(RelCrfError, ValueError):
    """Sizes of trellis, path or constraint system disagree."""


class DataError(RelCrfError, ValueError):
    """Malformed input file or corpus content."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EnumerationCapError(RelCrfError):
    """Exhaustive search refused because m**n exceeds the configured cap."""

    def __init__(self, m: int, n: int, cap: int):
        self.m, self.n, self.cap = m, n, cap
        super().__init__(f"m**n = {m}**{n} = {m ** n} exceeds cap {cap}")


class InfeasibleError(RelCrfError):
    """No path reaches the score floor of the constrained problem."""

    def __init__(self, floor: float, best_score: float):
        self.floor = floor
        self.best_score = best_score
        super().__init__(f"no path reaches score floor {floor!r}; best achievable {best_score!r}")
