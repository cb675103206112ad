"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class SvmixError(Exception):
    """Base class for package errors."""


class ConfigurationError(SvmixError):
    """Invalid or inconsistent run configuration."""


class DataError(SvmixError):
    """Input data failed validation (NaN/inf, wrong shape, missing file)."""


class NumericalError(SvmixError):
    """A numerical routine failed (non-positive variance, dead particles,
    unreachable series tolerance)."""
