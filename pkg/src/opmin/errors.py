"""Exception hierarchy shared by all modules."""


class OPminError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OPminError, ValueError):
    """An argument lies outside its admissible set (e.g. a mode index)."""


class PreconditionError(OPminError, ValueError):
    """An operation was called with arguments violating its contract."""


class NumericalOverflowError(OPminError, ArithmeticError):
    """A state or cost became non-finite.

    ``state`` holds the offending value and ``step`` the index at which it
    appeared, when known.
    """

    def __init__(self, message, state=None, step=None, stats=None):
        super().__init__(message)
        self.state = state
        self.step = step
        self.stats = stats


class BudgetOverflowError(OPminError, OverflowError):
    """A budget exceeds the native 64-bit range usable at runtime."""


class ResourceLimitError(OPminError, RuntimeError):
    """An enumeration would exceed its configured cap."""


class InversionRangeError(OPminError, ValueError):
    """No bracket for inverting a comparison function could be found."""


class DivergenceError(OPminError, ArithmeticError):
    """An iterated bound grew past the overflow guard."""


class FeasibilityError(OPminError, ValueError):
    """No horizon satisfies the exponential-stability condition."""


class FitError(OPminError, ValueError):
    """An exponential envelope cannot be fitted to a trajectory."""


class ValidationError(OPminError, ValueError):
    """A user-supplied object failed a sampled contract check."""


class ConfigError(OPminError, ValueError):
    """An experiment configuration is malformed."""
