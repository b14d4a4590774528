"""Exception types raised across the package."""


class TokenMapError(Exception):
    """Base class for all errors raised by tokenmap_sd."""


class EmptyCorpus(TokenMapError, ValueError):
    pass


class CorpusEncodingError(TokenMapError, ValueError):
    """The corpus file is not valid UTF-8."""


class InvalidConfig(TokenMapError, ValueError):
    pass


class EmptyMerge(TokenMapError, ValueError):
    """Two candidates share no common prefix and cannot be merged."""


class SchemaVersionMismatch(TokenMapError, ValueError):
    pass


class CorruptMap(TokenMapError, ValueError):
    pass


class VocabMismatch(TokenMapError, ValueError):
    pass


class LengthMismatch(TokenMapError, ValueError):
    pass


class BatchItemError(TokenMapError):
    """Wraps an exception raised while decoding one item of a batch."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"item {index}: {cause}")
        self.index = index
        self.cause = cause
