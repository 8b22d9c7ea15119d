"""Exception hierarchy shared by all analysis stages."""


class AnalysisError(Exception):
    """Base class for every error raised by :mod:`rvintervals`."""


class ParseError(AnalysisError):
    """Malformed input row; ``line`` is the 1-based line number in the source."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(AnalysisError):
    """Input values violate a domain invariant (nonpositive price, bad ordering...)."""


class StageError(AnalysisError):
    """A volatility series was passed to an operation expecting another stage."""


class DegenerateInputError(AnalysisError):
    """Zero variance, zero intraday mean or similar degenerate input."""


class InsufficientSampleError(AnalysisError):
    def __init__(self, message: str, count: int):
        self.count = count
        super().__init__(f"{message} (count={count})")


class DisjointSupportError(AnalysisError):
    """Two empirical distributions share no overlapping support."""


class ConfigurationError(AnalysisError):
    pass


class FitError(AnalysisError):
    pass


class ProcedureError(AnalysisError):
    """A Monte Carlo procedure could not complete (e.g. too many discarded replicas)."""
