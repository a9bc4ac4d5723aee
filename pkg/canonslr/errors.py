"""
Exception types raised across the package.

Callers that only care about "something in canonslr failed" catch
`CanonSLRError`; the subclasses double as the matching builtin so code
expecting `ValueError` / `OSError` keeps working.
"""


class CanonSLRError(Exception):
    """Base class for every error raised by canonslr."""


class InvalidArgumentError(CanonSLRError, ValueError):
    """An argument violates a documented precondition."""


class FeasibilityError(CanonSLRError, ValueError):
    """A CTC target cannot be emitted within the available frames."""


class DataIntegrityError(CanonSLRError):
    """A dataset or checkpoint on disk breaks one of its invariants."""


class ConfigError(CanonSLRError, ValueError):
    """A config file or override is malformed or names an unknown key."""


class ArtifactIOError(CanonSLRError, OSError):
    """Reading or writing an artifact failed."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{message}: {self.path}")
