"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: malformed files, out-of-range parameters, missing labels."""


class DatasetFormatError(ValidationError):
    """A dataset CSV that cannot be parsed; message carries row/column."""


class TrainingDivergence(ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, learning_rate, detail=""):
        self.epoch = epoch
        self.learning_rate = learning_rate
        msg = f"non-finite loss at epoch {epoch} (learning_rate={learning_rate})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
