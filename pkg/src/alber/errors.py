"""Exception types shared across the package.

The CLI maps :class:`ConfigError` (and other ``ValueError``) to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid user input: malformed files, bad parameters, empty grids."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class EmptySpectrumError(ConfigError):
    def __init__(self, msg: str = "empty spectrum"):
        super().__init__(msg)


class NumericalError(RuntimeError):
    """A numerical procedure could not meet its accuracy contract."""
