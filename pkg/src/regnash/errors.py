"""Exception hierarchy shared across the package."""


class RegNashError(Exception):
    """Base class for all errors raised by regnash."""


class InvalidGameError(RegNashError, ValueError):
    """A game description is malformed or violates a structural assumption."""


class IncompletePolicyError(RegNashError, ValueError):
    """A policy does not cover every information state of the game."""


class NumericError(RegNashError, ArithmeticError):
    """A computed quantity became non-finite."""


class DomainError(RegNashError, ValueError):
    """An argument lies outside the domain of a function (e.g. log of zero)."""


class SpecError(RegNashError, ValueError):
    """A transform specification is invalid."""


class UnsupportedError(RegNashError, ValueError):
    """An operation was requested in a mode or variant that does not support it."""


class IntegrationError(NumericError):
    """The dynamics produced non-finite scores."""

    def __init__(self, message, step=None, location=None):
        super().__init__(message)
        self.step = step
        self.location = location


class FitError(RegNashError, ValueError):
    """Not enough usable samples to fit a rate."""


class ConfigError(RegNashError, ValueError):
    """A run configuration is invalid. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
