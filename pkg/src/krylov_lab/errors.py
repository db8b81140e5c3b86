"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/validation problems exit with 1,
container format problems with 2, numerical failures with 3.
"""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine failed or produced results outside tolerance."""


class FormatError(ValueError):
    """A binary container could not be decoded."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class DivergedTrainingError(NumericalError):
    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} (loss={loss})")
