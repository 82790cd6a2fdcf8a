"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and NumericalError to exit code 3;
plain ValueError/IndexError are reserved for broken calling code and are not
caught.
"""


class ProxTomoError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ProxTomoError):
    """Invalid configuration or problem specification."""


class NumericalError(ProxTomoError):
    """Numerical failure while simulating, solving or evaluating."""


class DataError(NumericalError):
    """Measured data violates the assumptions of a computation."""
