"""Exception types shared across the package."""


class FamilyMismatchError(TypeError):
    """Two elements from different group families (or parameters) were combined."""


class IncompatibleActionError(TypeError):
    """A group element was applied to a point of a space it does not act on."""


class BudgetExceededError(RuntimeError):
    """An exact computation would exceed its configured size budget."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class GridOverflowError(BudgetExceededError):
    """A density grid would grow beyond its configured number of cells."""


class ResolutionError(ValueError):
    """A truncated boundary point is not deep enough for the requested evaluation."""


class HorizonTooShortError(RuntimeError):
    """Too few sample paths resolved their limit point within the horizon."""


class NoTriggerError(RuntimeError):
    """A stopping set was never hit within the available path."""


class DivergenceError(RuntimeError):
    """A Monte Carlo moment estimate failed the divergence guard."""


class ScenarioValidationError(ValueError):
    """A scenario file failed validation; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
