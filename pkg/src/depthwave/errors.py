"""Error types shared across the package.

Two families only: bad inputs (ValidationError, CLI exit code 1) and
failures during stepping (DivergenceError, CLI exit code 2).
"""


class ValidationError(ValueError):
    """Input, configuration, or domain data violates a documented contract."""


class DivergenceError(RuntimeError):
    """The field state went non-finite while stepping."""

    def __init__(self, step_index: int, message: str | None = None):
        self.step_index = step_index
        super().__init__(message or f"non-finite field values detected at step {step_index}")
