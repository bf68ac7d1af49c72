"""
Exceptions raised by ps_teleport. main() maps each family to its own exit code.
"""


class TeleportError(Exception):
    """
    Base class for every error raised by ps_teleport.
    """


class ParameterError(TeleportError, ValueError):
    """
    Raise when squeezing, transmissivity, efficiency or a detector name is outside its domain.
    """


class TruncationError(TeleportError):
    """
    Raise when the Fock cutoff is too small for the requested tolerance,
    i.e. probability leaks past n_max.
    """


class QuadratureError(TeleportError):
    """
    Raise when the radial quadrature of the characteristic function does not converge.
    """

    def __init__(self, message, error_estimate):
        super(QuadratureError, self).__init__(message)
        self.error_estimate = error_estimate


class HeraldingError(TeleportError):
    """
    Raise when the heralding probability of a photon subtraction vanishes.
    """


class ConfigError(TeleportError):
    """
    Raise when a config file cannot be parsed or does not match CONFIG_SCHEMA.
    """


class ValidationError(TeleportError):
    """
    Raise when oracle and closed forms disagree beyond tolerance.
    """
