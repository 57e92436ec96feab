"""Exception types shared by the library and the CLI."""


class ParqoError(Exception):
    """Base class for all parqo errors."""


class DomainError(ParqoError, ValueError):
    """An argument lies outside the domain of a quantity (e.g. PAR of zero)."""


class ConfigError(ParqoError, ValueError):
    """Invalid solver or experiment configuration."""


class SingularSystemError(ParqoError, ArithmeticError):
    """A Gram matrix ``A A^H`` is singular or too ill-conditioned to factor.

    ``tone`` is set when the failure belongs to one OFDM tone.
    """

    def __init__(self, message, tone=None):
        super().__init__(message)
        self.tone = tone
