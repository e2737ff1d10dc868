"""Shared exception types.

ValidationError covers bad inputs caught before any real work starts (CLI
exit code 1); everything else raised by the package derives from CespanError
(exit code 2).
"""


class CespanError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CespanError):
    """Input or configuration rejected during upfront validation."""
