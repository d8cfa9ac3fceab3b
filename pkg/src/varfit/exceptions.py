"""
Varfit: Error Hierarchy.

The library raises builtin exceptions (``ValueError``, ``ArithmeticError``)
like any numerical package. The classes below subclass those builtins so that
callers can keep catching ``ValueError``/``ArithmeticError`` while the command
line layer maps each family to a distinct exit code.

Exit codes:
    - UsageError: 1
    - DataError: 2
    - PreconditionError: 3
"""


class VarfitError(Exception):
    """Base class for every error raised on purpose by varfit."""

    exit_code = 3


class UsageError(VarfitError, ValueError):
    """Invalid combination of user-facing options."""

    exit_code = 1


class DataError(VarfitError, ValueError):
    """Input data cannot be parsed or does not match the requested design."""

    exit_code = 2


class PreconditionError(VarfitError, ArithmeticError):
    """A numeric precondition of an estimator or formula does not hold."""

    exit_code = 3
