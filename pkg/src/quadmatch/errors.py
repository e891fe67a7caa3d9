"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An operation received input that violates its preconditions."""


class NumericalFailureError(RuntimeError):
    """A computation produced non-finite values.

    ``stage`` names the pipeline stage where the failure was detected;
    ``history`` may carry partial training history when raised mid-run.
    """

    def __init__(self, message: str, stage: str | None = None, history=None):
        super().__init__(message)
        self.stage = stage
        self.history = history
