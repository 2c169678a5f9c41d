"""Exception hierarchy shared by the library and the CLI.

Each CLI-facing error carries the process exit code it maps to.
"""


class StieltjesLabError(Exception):
    exit_code = 1


class PoleError(StieltjesLabError, ValueError):
    """zeta(s) requested at the pole s = 1."""


class InsufficientNodesError(StieltjesLabError):
    """The phi table is too short for the requested alpha / gamma computation."""

    exit_code = 3


class InsufficientPrecisionError(StieltjesLabError):
    """The cutoff rule certifies fewer digits than required."""

    exit_code = 3


class InvalidSymbolError(StieltjesLabError, ValueError):
    """A digit string contains a symbol outside the base."""


class ConfigError(StieltjesLabError, ValueError):
    exit_code = 2


class CacheCorruptError(StieltjesLabError):
    exit_code = 4


class MissingArtifactError(StieltjesLabError):
    """A pipeline stage needs an artifact that an earlier stage never produced."""

    exit_code = 2


class VerificationError(StieltjesLabError):
    exit_code = 5

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)
