"""Typed errors shared across the pipeline.

Exit-code convention for the CLI: 2 for input problems (malformed files,
bad dimensions, bad model headers), 3 for numeric failures (non-finite
losses or weight updates). ``stage`` is filled in by the pipeline driver so
a failure can be attributed to the stage that raised it.
"""

from __future__ import annotations


class HarError(Exception):
    """Base class for all engine errors."""

    exit_code = 1

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        base = super().__str__()
        if self.stage:
            return f"[{self.stage}] {base}"
        return base


class InputError(HarError):
    """Malformed or inconsistent input data (files, arrays, headers)."""

    exit_code = 2


class NumericError(HarError):
    """Non-finite values produced where finite arithmetic is required."""

    exit_code = 3
