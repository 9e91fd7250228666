"""Exception hierarchy shared by the library and the CLI.

Each concrete error class carries a distinct ``exit_code`` so the CLI can
map failures to documented process exit statuses.
"""


class CbclError(Exception):
    """Base class for all structured errors raised by this package."""

    exit_code = 1


class DimensionMismatchError(CbclError):
    """A vector's dimensionality does not match what the context requires."""

    exit_code = 3

    def __init__(self, modality: str, expected: int, actual: int, context: str = ""):
        self.modality = modality
        self.expected = expected
        self.actual = actual
        suffix = f" ({context})" if context else ""
        super().__init__(
            f"{modality} dimension mismatch: expected {expected}, got {actual}{suffix}"
        )


class FormatError(CbclError):
    """A binary or CSV payload does not conform to its declared format."""

    exit_code = 4


class UnsupportedVersionError(FormatError):
    """A file declares a format version newer than this implementation."""

    exit_code = 5

    def __init__(self, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(
            f"unsupported format version {found}; this build supports up to {supported}"
        )


class ChecksumError(FormatError):
    """The trailing CRC32 of a file does not match its contents."""

    exit_code = 6

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"checksum mismatch: stored {expected:#010x}, computed {actual:#010x}"
        )


class JoinError(CbclError):
    """Sample ids disagree between feature files and the label manifest."""

    exit_code = 7


class ValidationError(CbclError):
    """A value violates a documented invariant or precondition."""

    exit_code = 8


class UnknownLabelError(CbclError):
    """A category label is not known to the model or merge plan."""

    exit_code = 9

    def __init__(self, label: str, context: str = ""):
        self.label = label
        suffix = f" in {context}" if context else ""
        super().__init__(f"unknown category label {label!r}{suffix}")
