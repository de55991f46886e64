"""Exception hierarchy shared by every perthro module.

Each class carries the CLI exit code used when it escapes a subcommand.
"""


class PerthroError(Exception):
    exit_code = 1


class DomainError(PerthroError, ValueError):
    """A numeric argument lies outside the domain of an operation."""


class UsageError(PerthroError, ValueError):
    """Shapes, dimensions or arguments do not fit together."""


class ConfigError(PerthroError):
    exit_code = 2


class DataError(PerthroError):
    """Dataset file missing or malformed."""

    exit_code = 3

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(PerthroError):
    exit_code = 4

    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class ScheduleError(PerthroError):
    """A pulse schedule could not be compiled or is malformed."""

    exit_code = 5


class VerificationError(ScheduleError):
    """A simulated schedule disagrees with the closed-form circuit output."""


class CalibrationError(PerthroError):
    exit_code = 6
