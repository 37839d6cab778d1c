class OneSFWError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(OneSFWError, ValueError):
    """An argument violates an operation's preconditions."""


class CapabilityError(OneSFWError):
    """The oracle cannot provide the requested quantity."""


class DomainError(OneSFWError, ValueError):
    """A density or log-density was evaluated where it is zero or undefined."""


class ConfigError(OneSFWError, ValueError):
    """An experiment configuration could not be resolved."""
