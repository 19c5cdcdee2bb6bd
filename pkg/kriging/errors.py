"""Exception hierarchy shared by the engine, the CLI and the HTTP routers."""


class KriglabError(Exception):
    """Base class for every error raised by the laboratory."""


class ConfigError(KriglabError, ValueError):
    """Invalid parameters, configs or call arguments."""


class DimensionMismatchError(ConfigError):
    pass


class DuplicatePointsError(ConfigError):
    pass


class PreconditionError(ConfigError):
    """An operation was called outside its documented domain."""


class UnsupportedFamilyError(ConfigError):
    """No closed-form spectral density for this covariance family."""


class UnsupportedKindError(ConfigError):
    """The requested transform is not available for this test function kind."""


class NumericalError(KriglabError, ArithmeticError):
    """Factorization failure or non-finite values in a kernel system."""


class KrigingDiagnosticWarning(UserWarning):
    """Numerical diagnostics surfaced to callers (clamping, jitter escalation)."""
