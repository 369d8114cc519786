"""Exception types shared across the package."""


class KgeAuditError(Exception):
    """Base class for all package-specific errors."""


class ParseError(KgeAuditError):
    """A triple file line could not be parsed.

    Carries the offending path and 1-based line number so callers can point
    users at the exact input line.
    """

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class InvalidDatasetError(KgeAuditError):
    """The dataset violates a structural requirement (empty train split,
    overlapping splits, and the like)."""


class ConfigError(KgeAuditError):
    """A model or experiment configuration is invalid."""


class IncompatibleModelsError(KgeAuditError):
    """Models built over different dictionaries were combined."""


class TrainingDivergedError(KgeAuditError):
    """The training loss became non-finite."""
