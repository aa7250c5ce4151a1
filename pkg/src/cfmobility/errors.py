"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the domain a function accepts."""


class InsufficientPointsError(ParameterError):
    """A nearest-neighbour query asked for more points than exist."""


class ConfigurationError(ValueError):
    """A run configuration that cannot be executed as given."""


class NumericError(RuntimeError):
    """A numerical routine failed to reach its requested tolerance."""


class RegimeWarning(UserWarning):
    """A closed-form approximation was evaluated outside its validity regime."""
