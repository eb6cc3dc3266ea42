"""Exception hierarchy shared by all modules."""


class LcirtError(Exception):
    """Base class for package errors."""


class InvalidCategoryCountError(LcirtError, ValueError):
    pass


class InvalidOrderingError(LcirtError, ValueError):
    """Global logits that are not strictly decreasing in the category index."""


class DegenerateDistributionError(LcirtError, ValueError):
    pass


class SingularJacobianError(LcirtError, ArithmeticError):
    pass


class InvalidPatternError(LcirtError, ValueError):
    pass


class NumericUnderflowError(LcirtError, ArithmeticError):
    """A response pattern has zero probability under every latent class."""

    def __init__(self, message, pattern=None):
        super().__init__(message)
        self.pattern = pattern


class PackingError(LcirtError, ValueError):
    pass


class SpecError(LcirtError, ValueError):
    """Structurally invalid model specification."""


class DataError(LcirtError, ValueError):
    """Malformed response data; carries the offending location when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class UsageError(LcirtError, ValueError):
    pass


class FailedOptimizationError(LcirtError, ArithmeticError):
    """A likelihood-ratio deviance came out negative beyond tolerance."""


class SelectionError(LcirtError):
    """A model-selection step failed; ``report`` holds the partial result."""

    def __init__(self, message, step=None, report=None):
        super().__init__(message)
        self.step = step
        self.report = report
