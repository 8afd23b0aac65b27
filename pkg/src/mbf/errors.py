"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A size, count, index or option is outside its allowed range."""


class CapacityError(MemoryError):
    """A requested bit matrix exceeds the configured memory budget."""


class FrozenFilterError(RuntimeError):
    """Mutation attempted on a filter after :meth:`freeze`."""


class SnapshotError(ValueError):
    """A binary snapshot is truncated or carries a bad header."""


class DocwordParseError(ValueError):
    """Malformed UCI Bag-of-Words docword input."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetMissingError(FileNotFoundError):
    """A real-world dataset file was requested but is not on disk."""
