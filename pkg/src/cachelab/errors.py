"""Exception types shared across the package."""


class CacheLabError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CacheLabError, ValueError):
    pass


class ResourceLimit(CacheLabError):
    """A solver guard was tripped; the instance is too large to enumerate."""


class UnsupportedPolicy(CacheLabError, ValueError):
    pass


class UndefinedRatio(CacheLabError, ZeroDivisionError):
    pass


class OutOfRange(CacheLabError, ValueError):
    """Requested target cannot be reached; ``supremum`` holds the achievable limit."""

    def __init__(self, message, supremum=None):
        super().__init__(message)
        self.supremum = supremum


class TraceFormatError(CacheLabError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(TraceFormatError):
    pass
