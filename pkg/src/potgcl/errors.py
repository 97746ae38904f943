"""Exception hierarchy shared by every module."""


class PotError(Exception):
    """Base class for all package errors."""


class ValidationError(PotError, ValueError):
    pass


class MalformedInputError(ValidationError):
    pass


class DimensionError(PotError, ValueError):
    pass


class ContractError(PotError, RuntimeError):
    """An operation was called outside its documented preconditions."""


class DegenerateEmbeddingError(PotError, ArithmeticError):
    """A row with (near) zero L2 norm was normalized."""


class InfeasibleBudgetError(ValidationError):
    pass


class EnumerationGuardError(PotError, RuntimeError):
    """The brute-force oracle refused an instance that is too large."""


class TrainingAbortedError(PotError, RuntimeError):
    def __init__(self, epoch, components):
        self.epoch = epoch
        self.components = dict(components)
        detail = ", ".join(f"{k}={v!r}" for k, v in self.components.items())
        super().__init__(f"non-finite loss at epoch {epoch}: {detail}")
