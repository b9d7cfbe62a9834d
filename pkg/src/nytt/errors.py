"""Exception types raised across the package."""


class NyttError(Exception):
    """Base class for all package errors."""


class ParameterError(NyttError, ValueError):
    """An argument is outside its valid range."""


class DegenerateInputError(NyttError, ValueError):
    """Input has zero power, zero frames, or is otherwise unusable."""


class ShapeError(NyttError, ValueError):
    """Array shapes or kinds do not line up."""


class UnsupportedFormatError(NyttError, ValueError):
    """WAV file uses an encoding this package does not read."""

    def __init__(self, field, value, expected):
        self.field = field
        self.value = value
        super().__init__(f"unsupported WAV {field}: {value!r} (expected {expected})")


class TrainingDivergedError(NyttError, FloatingPointError):
    """Non-finite loss or gradient; carries a small diagnostic snapshot."""

    def __init__(self, message, snapshot=None):
        self.snapshot = snapshot or {}
        super().__init__(f"{message} {self.snapshot}" if snapshot else message)


class CleanAccessError(NyttError, RuntimeError):
    """A noisy-target-only strategy tried to read a clean reference."""
