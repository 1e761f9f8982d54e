"""Exception hierarchy shared by all modules."""


class GiknError(Exception):
    pass


class AlphabetMismatch(GiknError, ValueError):
    pass


class DegenerateProductError(GiknError, ArithmeticError):
    pass


class NotHyperbolicError(GiknError, ValueError):
    pass


class InfeasibleParameters(GiknError, ValueError):
    """No finite construction satisfies the requested parameters."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ModelInfeasibleError(GiknError):
    """The model cannot realize a requested exponent target."""

    def __init__(self, message, level=None, nearest=None):
        super().__init__(message)
        self.level = level
        self.nearest = nearest


class PeriodBudgetError(ModelInfeasibleError):
    pass


class WindowNotFoundError(GiknError):
    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class HypothesisError(GiknError, ValueError):
    """An input violates a structural hypothesis (refusal, not a bug)."""


class BudgetError(GiknError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ModelError(GiknError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
