"""Exception hierarchy shared by all modules."""


class SynchrothermError(Exception):
    """Base class for library errors."""


class ValidationError(SynchrothermError, ValueError):
    """Input violates a documented precondition."""


class TruncationError(SynchrothermError):
    """Requested Fock levels are not certified by the truncation.

    ``required_n_max`` is the smallest table size that would certify them.
    """

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max


class IntegrationError(SynchrothermError, RuntimeError):
    """Time integration failed; ``achieved_time`` is the last accepted time."""

    def __init__(self, message, achieved_time=None):
        super().__init__(message)
        self.achieved_time = achieved_time


class ConfigError(ValidationError):
    """Configuration failed schema validation; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
