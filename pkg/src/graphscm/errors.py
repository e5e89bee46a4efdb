"""Shared exception types.

The CLI maps these onto exit codes: input/validation problems exit 2,
numeric failures (non-finite values mid-run) exit 3.
"""


class GraphScmError(Exception):
    """Base class for all package errors."""


class DimensionError(GraphScmError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(GraphScmError, ArithmeticError):
    """A computation produced or encountered a non-finite value."""


class LoadError(GraphScmError, ValueError):
    """A dataset or checkpoint file is missing, malformed, or inconsistent."""


class ContractError(GraphScmError, ValueError):
    """An operation was called outside its documented preconditions."""


class ConfigError(GraphScmError, ValueError):
    """A run configuration is invalid (empty split, bad parameter, ...)."""
