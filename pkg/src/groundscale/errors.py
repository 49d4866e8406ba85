"""Exception types shared across the package.

Validation problems (bad arguments, bad configs, bad files) derive from
ValueError; numerical/runtime failures (degenerate batches, stalled
optimizations) derive from RuntimeError. The CLI maps the former to exit
code 1 and the latter to exit code 2.
"""


class BehindCameraError(ValueError):
    """Raised when projecting a point with non-positive camera-axis depth."""


class AngleRangeError(ValueError):
    """Raised when an augmentation angle exceeds its allowed magnitude."""


class ConfigurationError(ValueError):
    """Raised for inconsistent configuration values (e.g. tau >= 1)."""


class ContractViolationError(ValueError):
    """Raised when a cross-field contract is broken (e.g. attention > 0 on an
    invalid prior pixel)."""


class GridParseError(ValueError):
    """Raised for malformed PFM/PPM payloads; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DegenerateBatchError(RuntimeError):
    """Raised when a loss has no valid pixels to average over."""


class DegenerateEvaluationError(RuntimeError):
    """Raised when a metric evaluation has an empty mask."""


class OptimizationFailure(RuntimeError):
    """Raised when scale recovery cannot make progress; carries the loss
    history accumulated so far."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
