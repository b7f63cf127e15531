"""Exception hierarchy. ``exit_code`` is what the command line reports."""


class AricError(Exception):
    exit_code = 1


class UsageError(AricError):
    exit_code = 2


class DimensionError(AricError, ValueError):
    exit_code = 2


class TrainingError(AricError, ValueError):
    exit_code = 2


class FormatError(AricError):
    """Malformed input bytes (image, codebook or bitstream)."""

    exit_code = 4

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncationError(FormatError):
    pass


class CorruptionError(FormatError):
    pass


class HashMismatchError(AricError):
    exit_code = 5
