"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
numerical failures exit 2.
"""


class ConfigError(ValueError):
    """Invalid parameter or configuration value."""


class ValidityError(ConfigError):
    """A formula was evaluated outside its guaranteed validity region."""


class NumericalFailure(RuntimeError):
    """A numerical procedure could not produce a result (no root bracket,
    no feasible point in a search, ...)."""
