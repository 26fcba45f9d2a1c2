"""Exception hierarchy shared by all modules; the CLI maps these to exit codes."""


class SalemError(Exception):
    exit_code = 1


class ConfigError(SalemError, ValueError):
    exit_code = 2


class InfeasibleScheduleError(SalemError):
    exit_code = 3

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class InvariantViolation(SalemError):
    exit_code = 4


class AttemptCapExceeded(SalemError):
    exit_code = 5

    def __init__(self, message, level=None, seed=None):
        super().__init__(message)
        self.level = level
        self.seed = seed


class TailDivergentError(SalemError):
    """Raised when q*beta/2 <= 1 so the power-law tail certificate is not integrable."""

    exit_code = 4
