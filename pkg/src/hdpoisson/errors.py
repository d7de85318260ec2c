"""Exception types shared across the package."""


class HdpError(Exception):
    """Base class for all package errors."""


class OverflowDomain(HdpError):
    """A linear predictor left the domain where exp() is safe to evaluate."""


class NoConvergence(HdpError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class Unbounded(HdpError):
    """The penalized dual objective is unbounded below (penalty too small)."""


class AllUnbounded(HdpError):
    """No tuning value on the search grid gave a bounded dual problem."""


class DimensionMismatch(HdpError):
    """Array shapes are inconsistent with the data they must align with."""


class InvalidLoading(HdpError):
    """The loading vector is unusable (zero, wrong length, or non-finite)."""


class ZeroLoading(InvalidLoading):
    """The group loading collapsed to the zero vector."""


class DegenerateTreatment(HdpError):
    """The treatment vector has zero sum of squares; OLS slopes undefined."""


class CsvError(HdpError):
    """A delimited input file failed to parse; carries location info."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
