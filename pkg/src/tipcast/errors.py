"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
numerical failures exit 2, and I/O failures exit 3.
"""


class TipcastError(Exception):
    """Base class for all package errors."""


class ConfigError(TipcastError, ValueError):
    """Invalid specification, option, or input contract violation."""


class NumericError(TipcastError, RuntimeError):
    """Numerical failure: blow-up, non-convergence, or degenerate data."""
