class NsstabError(Exception):
    pass


class EvaluationError(NsstabError):
    """A scalar field returned a non-finite value."""


class GuardedDomainError(NsstabError):
    """Every parameter value was rejected by a family's singular guard."""


class BlowUpError(NsstabError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(NsstabError):
    pass
