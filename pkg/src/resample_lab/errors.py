"""Exception types shared across the package."""


class ResampleLabError(Exception):
    """Base class for all package errors."""


class PhiOutOfRange(ResampleLabError):
    """Implied AR(1) persistence violates |phi| < 1."""


class DegenerateSignal(ResampleLabError):
    """Zero signal-variance ratio is incompatible with nonzero autocorrelation."""


class InfeasibleClip(ResampleLabError):
    """GARCH beta alone already exceeds the admissible persistence range."""


class WindowOutOfRange(ResampleLabError):
    """Rolling-window index does not leave enough history."""


class SingularCovariance(ResampleLabError):
    """Covariance matrix is not invertible to working precision."""

    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class DegenerateSeries(ResampleLabError):
    """Series has zero variance where a positive variance is required."""


class InvalidProbability(ResampleLabError):
    """Probability argument outside (0, 1)."""


class ThetaNearZero(ResampleLabError):
    """Sharpe ratio too close to zero for a 1/theta formula."""


class InsufficientData(ResampleLabError):
    """Series too short for the requested operation."""


class MissingValue(ResampleLabError):
    """Blank or unparseable cell in an input table."""

    def __init__(self, msg, row=None, column=None):
        super().__init__(msg)
        self.row = row
        self.column = column


class NonMonotoneDates(ResampleLabError):
    """Date column is not strictly increasing."""


class ParseError(ResampleLabError):
    """Malformed input file."""

    def __init__(self, msg, row=None, column=None):
        super().__init__(msg)
        self.row = row
        self.column = column


class RankDeficient(ResampleLabError):
    """Regression design matrix is rank deficient."""
