"""Exception hierarchy shared by every module.

Each error carries the module and operation that raised it so the command
line tool can print one structured line and pick the right exit code.
"""

from __future__ import annotations


class CoclusterError(Exception):
    """Base class: ``module: operation: cause``."""

    def __init__(self, module: str, operation: str, cause: str):
        self.module = module
        self.operation = operation
        self.cause = cause
        super().__init__(f"{module}: {operation}: {cause}")


class ConfigError(CoclusterError):
    """Bad or inconsistent configuration values (CLI exit code 2)."""


class InputError(CoclusterError):
    """Missing or mutually inconsistent inputs (CLI exit code 3)."""


class FormatError(CoclusterError):
    """Malformed file content; names the offending field (CLI exit code 3)."""


class InfeasibleError(CoclusterError):
    """A constraint system admits no binary solution (CLI exit code 4)."""
