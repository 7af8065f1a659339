"""Exception hierarchy for curesvm.

Every error raised by this package derives from :class:`CureSvmError`, so
callers can catch one type at the boundary (the CLI does exactly that).
Subclasses also derive from the closest builtin so that generic code keeps
working, e.g. ``ShapeError`` is a ``ValueError``.
"""


class CureSvmError(Exception):
    """Base class for all curesvm errors."""


class SchemaError(CureSvmError, KeyError):
    """A required column is missing from an input file."""


class ValidationError(CureSvmError, ValueError):
    """Input data violates a structural invariant (bad row, bad value)."""


class ShapeError(CureSvmError, ValueError):
    """Array dimensions do not match what an operation requires."""


class NumericError(CureSvmError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DegenerateColumnError(CureSvmError, ValueError):
    """A covariate column has zero variance and cannot be standardized."""


class DegenerateLabelsError(CureSvmError, ValueError):
    """A classifier was given labels from a single class."""


class DegenerateFoldError(CureSvmError, ValueError):
    """Stratified cross-validation cannot form folds with both classes."""


class IterationLimitError(CureSvmError, RuntimeError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GradientUnreliableError(CureSvmError, ArithmeticError):
    """The latency gradient is undefined because a likelihood term was
    floored; callers should fall back to derivative-free search."""


class NoEventsError(CureSvmError, ValueError):
    """A dataset has no observed events, so latency initialisation fails."""


class BootstrapUnstableError(CureSvmError, RuntimeError):
    """Too many bootstrap replicates failed to produce estimates."""


class StudyUnstableError(CureSvmError, RuntimeError):
    """Too many Monte Carlo runs failed inside a simulation study."""
