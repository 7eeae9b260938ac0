"""Exception hierarchy shared by all simulator modules."""


class CoexsimError(Exception):
    """Base class for every error raised by coexsim."""


class ConfigurationError(CoexsimError, ValueError):
    """A parameter combination the simulator does not support."""


class ShapeError(CoexsimError, ValueError):
    """Array dimensions disagree with the waveform numerology."""


class InputError(CoexsimError, ValueError):
    """Input values are outside the domain of an operation."""


class RangeError(CoexsimError, ValueError):
    """A table or estimate does not cover the requested range."""


class NumericalError(CoexsimError, ArithmeticError):
    """A solver or estimator produced a non-finite or inconsistent result."""
