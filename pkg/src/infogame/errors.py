class InfoGameError(Exception):
    """Base class for all library errors."""


class ArgumentError(InfoGameError, ValueError):
    """Invalid arguments: overlapping index sets, bad agent splits, etc."""


class CatalogError(InfoGameError, IndexError):
    """An index does not exist in the scenario's variable catalog."""


class NumericError(InfoGameError, ArithmeticError):
    """Broken covariance, failed factorisation, or a non-finite state."""

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class GridCoverageError(NumericError):
    """A quadrature grid misses more than the allowed tail mass."""


class BudgetExceededError(InfoGameError):
    """Enumeration would exceed the configured joint-action budget."""

    def __init__(self, size, budget):
        super().__init__(f"joint action space has {size} elements, budget is {budget}")
        self.size = size
        self.budget = budget


class DegeneracyError(InfoGameError):
    """Every particle weight vanished after an update."""


class ConfigError(InfoGameError):
    """Run configuration failed validation."""
