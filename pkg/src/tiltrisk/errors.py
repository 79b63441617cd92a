"""Exception hierarchy shared across the package."""


class TiltriskError(Exception):
    """Base class for all package errors."""


class ConfigError(TiltriskError):
    """Invalid analysis configuration (bad keys, inconsistent choices)."""


class DataError(TiltriskError):
    """Malformed input data (missing columns, bad cells, empty strata)."""


class DomainError(TiltriskError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PositivityError(DomainError):
    """A probability that must be strictly inside (0, 1) hit a boundary."""


class TiltOverflowError(TiltriskError, OverflowError):
    """A tilt exponent exceeds the representable range of float64."""


class RankDeficientError(TiltriskError):
    """Design matrix is rank deficient; carries the offending column names."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "design matrix is rank deficient; dependent columns: "
            + ", ".join(self.columns)
        )


class ConvergenceError(TiltriskError):
    """An iterative solver failed to reach its tolerance."""


class NumericError(TiltriskError):
    """Numerical failure during estimation (propagates to exit code 4)."""
