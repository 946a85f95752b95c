"""Exception hierarchy shared by all gcalc modules."""


class GCalcError(Exception):
    """Base class for every error raised by gcalc."""


class BudgetExceededError(GCalcError):
    """A tree, lattice or enumeration would exceed its configured size budget."""


class DimensionMismatchError(GCalcError, ValueError):
    pass


class AdaptednessError(GCalcError, ValueError):
    """An integrand slice does not live on the depth it is attached to."""


class TreeMismatchError(GCalcError, ValueError):
    pass


class NonFiniteError(GCalcError, FloatingPointError):
    pass


class AssumptionError(GCalcError):
    """Declared regularity constants were contradicted by sampling."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ContractionError(GCalcError):
    """A contraction precondition (per-step or Picard) does not hold."""


class ConvergenceError(GCalcError):
    """An iteration hit its cap. ``history`` carries the residuals for diagnosis."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class BlowUpError(GCalcError):
    """The Bihari bound leaves the range of v, i.e. blows up in finite time."""


class ConfigError(GCalcError, ValueError):
    """Malformed run configuration; the message names the offending field."""
