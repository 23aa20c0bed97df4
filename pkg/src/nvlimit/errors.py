"""Exception types shared across the package.

Every abort path carries a short machine-readable ``reason`` code so the
CLI can emit it verbatim before exiting.
"""


class NvlimitError(Exception):
    """Base class; ``reason`` is a stable machine-readable code."""

    reason = "error"

    def __init__(self, message, reason=None):
        super().__init__(message)
        if reason is not None:
            self.reason = reason


class ConfigurationError(NvlimitError):
    reason = "configuration"


class RejectedInputError(NvlimitError):
    reason = "rejected-input"


class SupportViolationError(NvlimitError):
    reason = "support-violation"


class NumericalInstabilityError(NvlimitError):
    reason = "numerical-instability"


class AccuracyError(NvlimitError):
    reason = "accuracy"
