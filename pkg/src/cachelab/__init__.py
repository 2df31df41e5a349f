"""Cache simulation, exact Markov analysis, approximations and offline bounds."""

__version__ = "0.1.0"

from .errors import (CacheLabError, InvalidArgument, OutOfRange, ResourceLimit, SchemaError,
                     TraceFormatError, UndefinedRatio, UnsupportedPolicy)
from .workload import Catalog, Trace, generate_irm_trace, load_trace, write_trace, zipf_catalog

__all__ = [
    "CacheLabError", "InvalidArgument", "OutOfRange", "ResourceLimit", "SchemaError",
    "TraceFormatError", "UndefinedRatio", "UnsupportedPolicy",
    "Catalog", "Trace", "generate_irm_trace", "load_trace", "write_trace", "zipf_catalog",
]
