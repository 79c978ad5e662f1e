"""Exception types shared across the package."""


class FiltergenError(Exception):
    """Base class for all filtergen errors."""


class InputError(FiltergenError, ValueError):
    """Invalid argument, malformed file, or violated precondition."""


class ConfigError(FiltergenError, ValueError):
    """Experiment configuration failed validation.

    Carries the full list of problems so a user can fix them in one pass.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class BudgetError(FiltergenError, RuntimeError):
    """Rejection-sampling attempt budget exhausted.

    ``partial`` holds whatever was accepted before giving up and ``stats``
    the attempt statistics, so callers can inspect or salvage the run.
    """

    def __init__(self, message, partial=None, stats=None):
        super().__init__(message)
        self.partial = partial
        self.stats = stats


class DegenerateError(FiltergenError, ArithmeticError):
    """A distribution collapsed to zero mass and cannot be normalized."""
