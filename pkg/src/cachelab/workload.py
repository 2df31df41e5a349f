"""Object catalogs and request traces.

A :class:`Catalog` is the universe of cacheable objects with per-object size
(bytes), caching value and unnormalised popularity weight.  A :class:`Trace`
is an ordered request sequence over a catalog, optionally time-stamped.
Objects are referenced internally by their dense catalog index; the public
identifier of an object is always a string.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidArgument, SchemaError, TraceFormatError

CSV_HEADER = ("time", "object", "size", "value")


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    size: int = 1
    value: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if self.size < 1 or int(self.size) != self.size:
            raise InvalidArgument(f"object {self.id!r}: size must be a positive integer, got {self.size}")
        if not self.value >= 0:
            raise InvalidArgument(f"object {self.id!r}: value must be >= 0, got {self.value}")
        if not self.weight >= 0:
            raise InvalidArgument(f"object {self.id!r}: weight must be >= 0, got {self.weight}")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Catalog:
    """Ordered, immutable collection of :class:`CatalogEntry`."""

    def __init__(self, entries: Iterable[CatalogEntry]):
        self.entries = tuple(entries)
        self._index = {}
        for i, e in enumerate(self.entries):
            if e.id in self._index:
                raise InvalidArgument(f"duplicate object id {e.id!r}")
            self._index[e.id] = i
        self.sizes = _frozen(np.array([e.size for e in self.entries], dtype=np.int64))
        self.values = _frozen(np.array([e.value for e in self.entries], dtype=np.float64))
        self.weights = _frozen(np.array([e.weight for e in self.entries], dtype=np.float64))
        total = self.weights.sum() if self.entries else 0.0
        if total > 0:
            self.pmf = _frozen(self.weights / total)
        else:
            self.pmf = _frozen(np.zeros(len(self.entries)))

    @classmethod
    def from_arrays(cls, weights, sizes=None, values=None, ids=None) -> "Catalog":
        weights = np.asarray(weights, dtype=np.float64)
        n = len(weights)
        sizes = np.ones(n, dtype=np.int64) if sizes is None else np.asarray(sizes)
        values = np.ones(n) if values is None else np.asarray(values, dtype=np.float64)
        ids = [str(k) for k in range(1, n + 1)] if ids is None else [str(i) for i in ids]
        if not (len(sizes) == len(values) == len(ids) == n):
            raise InvalidArgument("weights, sizes, values and ids must have equal length")
        return cls(
            CatalogEntry(ids[k], int(sizes[k]), float(values[k]), float(weights[k]))
            for k in range(n)
        )

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def index_of(self, object_id) -> int:
        return self._index[str(object_id)]

    def __contains__(self, object_id):
        return str(object_id) in self._index

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __repr__(self):
        return f"Catalog(n={len(self)}, bytes={int(self.sizes.sum())})"


@dataclass(frozen=True)
class Request:
    index: int
    object: str
    time: float | None = None


class Trace:
    """Request sequence tied to a catalog.

    ``objects`` holds catalog indices, ``times`` is ``None`` or a
    non-decreasing float array of the same length.
    """

    def __init__(self, catalog: Catalog, objects, times=None):
        objects = np.asarray(objects, dtype=np.int64)
        if objects.ndim != 1:
            raise InvalidArgument("objects must be one-dimensional")
        if len(objects) and (objects.min() < 0 or objects.max() >= len(catalog)):
            raise InvalidArgument("trace references an object outside the catalog")
        if times is not None:
            times = np.asarray(times, dtype=np.float64)
            if times.shape != objects.shape:
                raise InvalidArgument("times and objects differ in length")
            if len(times) and (times[0] < 0 or np.any(np.diff(times) < 0)):
                raise InvalidArgument("times must be non-negative and non-decreasing")
            times = _frozen(times)
        self.catalog = catalog
        self.objects = _frozen(objects)
        self.times = times

    def __len__(self):
        return len(self.objects)

    @property
    def requests(self) -> list[Request]:
        ids = self.catalog.ids
        if self.times is None:
            return [Request(i, ids[k]) for i, k in enumerate(self.objects.tolist())]
        return [
            Request(i, ids[k], t)
            for i, (k, t) in enumerate(zip(self.objects.tolist(), self.times.tolist()))
        ]

    def __iter__(self) -> Iterator[Request]:
        return iter(self.requests)

    @property
    def object_ids(self) -> list[str]:
        ids = self.catalog.ids
        return [ids[k] for k in self.objects.tolist()]

    @property
    def request_sizes(self) -> np.ndarray:
        return self.catalog.sizes[self.objects]

    @property
    def request_values(self) -> np.ndarray:
        return self.catalog.values[self.objects]

    def distinct(self) -> int:
        return int(len(np.unique(self.objects)))

    def slice(self, start: int, stop: int) -> "Trace":
        times = None if self.times is None else self.times[start:stop]
        return Trace(self.catalog, self.objects[start:stop], times)

    def __eq__(self, other):
        # Equality covers what the CSV format stores: ids, sizes, values and
        # times of the requested objects.
        if not isinstance(other, Trace) or len(self) != len(other):
            return NotImplemented if not isinstance(other, Trace) else False
        if self.object_ids != other.object_ids:
            return False
        if not np.array_equal(self.request_sizes, other.request_sizes):
            return False
        if not np.array_equal(self.request_values, other.request_values):
            return False
        if len(self) == 0:
            return True
        if (self.times is None) != (other.times is None):
            return False
        return self.times is None or np.array_equal(self.times, other.times)

    __hash__ = None

    def __repr__(self):
        return f"Trace(R={len(self)}, catalog={self.catalog!r}, timed={self.times is not None})"


# ---------------------------------------------------------------------------
# popularity and size models


def zipf_pmf(n: int, beta: float) -> np.ndarray:
    """Zipf probabilities ``p_k = alpha * k**-beta`` for ``k = 1..n``."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if not (beta >= 0 and math.isfinite(beta)):
        raise InvalidArgument(f"beta must be finite and >= 0, got {beta}")
    w = np.arange(1, n + 1, dtype=np.float64) ** (-float(beta))
    return w / w.sum()


def lognormal_sizes(n: int, mu: float, sigma: float, seed: int) -> np.ndarray:
    """Object sizes ``round(exp(mu + sigma*Z) * 1000)`` bytes, at least one byte.

    The model is specified in kByte; the factor 1000 converts to bytes.
    """
    if sigma < 0:
        raise InvalidArgument(f"sigma must be >= 0, got {sigma}")
    if n < 0:
        raise InvalidArgument(f"n must be >= 0, got {n}")
    z = np.random.default_rng(seed).standard_normal(n)
    s = np.rint(np.exp(mu + sigma * z) * 1000.0)
    return np.maximum(s, 1).astype(np.int64)


def lognormal_values(n: int, mu: float, sigma: float, seed: int) -> np.ndarray:
    """Dimensionless lognormal object values ``exp(mu + sigma*Z)``."""
    if sigma < 0:
        raise InvalidArgument(f"sigma must be >= 0, got {sigma}")
    return np.exp(mu + sigma * np.random.default_rng(seed).standard_normal(n))


def zipf_catalog(n, beta, sizes=None, values=None) -> Catalog:
    return Catalog.from_arrays(zipf_pmf(n, beta), sizes, values)


def delay_value(d_source: float, d_cache: float, d_check: float) -> float:
    """Per-hit delay value: saved delay minus the lookup overhead.

    Negative results are legal and flag objects whose caching does not pay.
    """
    if min(d_source, d_cache, d_check) < 0:
        raise InvalidArgument("delays must be non-negative")
    return (d_source - d_cache) - d_check


# ---------------------------------------------------------------------------
# synthetic traces


def generate_irm_trace(catalog: Catalog, r: int, seed: int) -> Trace:
    """``r`` i.i.d. requests drawn from the catalog's pmf."""
    if len(catalog) == 0:
        raise InvalidArgument("catalog is empty")
    if not catalog.weights.sum() > 0:
        raise InvalidArgument("catalog pmf is undefined (all weights zero)")
    rng = np.random.default_rng(seed)
    objects = rng.choice(len(catalog), size=r, p=catalog.pmf)
    return Trace(catalog, objects)


def loop_trace(n_objects: int, r: int) -> Trace:
    """Objects ``1..n_objects`` requested cyclically, ``r`` requests in total."""
    if n_objects < 1:
        raise InvalidArgument("n_objects must be >= 1")
    cat = Catalog.from_arrays(np.ones(n_objects))
    return Trace(cat, np.arange(r) % n_objects)


def zipf_weight_sampler(n: int = 1000, beta: float = 1.0, scale: float = 0.1):
    """Sampler of initial request probabilities for new objects.

    Draws a rank ``k`` from ``zipf_pmf(n, beta)`` and returns
    ``scale * zipf_pmf(n, beta)[k]``, so new objects mostly enter with a small
    probability and occasionally as a hot item.
    """
    pmf = zipf_pmf(n, beta)

    def sample(rng: np.random.Generator) -> float:
        return float(scale * pmf[rng.choice(n, p=pmf)])

    return sample


@dataclass(frozen=True)
class ChurnModel:
    p_new: float
    initial_catalog: Catalog
    new_weight_sampler: Callable[[np.random.Generator], float] = field(
        default_factory=zipf_weight_sampler
    )
    new_size_sampler: Callable[[np.random.Generator], int] | None = None
    new_value: float = 1.0

    def __post_init__(self):
        if not 0 <= self.p_new <= 1:
            raise InvalidArgument(f"p_new must lie in [0, 1], got {self.p_new}")
        if len(self.initial_catalog) == 0 and self.p_new < 1:
            raise InvalidArgument("initial catalog is empty")


@dataclass
class ChurnLog:
    """Append-only record of new-object events of a churn trace.

    ``events`` holds ``(request_index, object_index, p_init)``; the request at
    ``request_index`` is the first request to the new object.  The pmf in
    force for request ``r`` (over objects existing before it, summing to one)
    is rebuilt by replaying the events before ``r``.
    """

    p_new: float
    initial_pmf: np.ndarray
    events: list = field(default_factory=list)
    n_requests: int = 0

    def segments(self) -> Iterator[tuple[int, int, np.ndarray]]:
        """Yield ``(start, stop, pmf)``: requests ``start..stop-1`` share ``pmf``.

        A segment boundary sits right after each new-object request, because
        the pmf changes once the new object has entered.
        """
        pmf = np.array(self.initial_pmf, dtype=np.float64)
        start = 0
        for r, k, p_init in self.events:
            stop = r + 1
            if stop > start:
                yield start, stop, pmf
            pmf = np.append(pmf * (1.0 - p_init), p_init)
            if len(pmf) != k + 1:
                raise InvalidArgument("churn log object indices are not dense")
            start = stop
        if self.n_requests > start:
            yield start, self.n_requests, pmf

    def pmf_at(self, r: int) -> np.ndarray:
        for start, stop, pmf in self.segments():
            if start <= r < stop:
                return pmf
        raise IndexError(r)


def generate_churn_trace(model: ChurnModel, r: int, seed: int) -> tuple[Trace, ChurnLog]:
    """Request sequence with popularity churn.

    With probability ``p_new`` a request goes to a brand-new object whose
    initial request probability ``p_init`` is drawn from the sampler; every
    older object is then rescaled by ``1 - p_init``.  Otherwise the request is
    drawn from the current pmf.
    """
    rng = np.random.default_rng(seed)
    base = model.initial_catalog
    pmf = np.array(base.pmf, dtype=np.float64)
    log = ChurnLog(model.p_new, pmf.copy(), [], r)
    sizes = list(base.sizes.tolist())
    values = list(base.values.tolist())
    is_new = rng.random(r) < model.p_new
    new_at = np.flatnonzero(is_new).tolist()
    objects = np.empty(r, dtype=np.int64)
    start = 0
    for pos in new_at + [r]:
        if pos > start:
            if len(pmf) == 0:
                raise InvalidArgument("no object to request: empty catalog and no new object")
            cdf = np.cumsum(pmf)
            u = rng.random(pos - start) * cdf[-1]
            objects[start:pos] = np.minimum(np.searchsorted(cdf, u, side="right"), len(pmf) - 1)
        if pos == r:
            break
        p_init = float(model.new_weight_sampler(rng))
        if not 0 <= p_init < 1:
            raise InvalidArgument(f"new-object probability must lie in [0, 1), got {p_init}")
        k = len(pmf)
        log.events.append((pos, k, p_init))
        objects[pos] = k
        pmf = np.append(pmf * (1.0 - p_init), p_init)
        sizes.append(int(model.new_size_sampler(rng)) if model.new_size_sampler else 1)
        values.append(model.new_value)
        start = pos + 1
    n0 = len(base)
    ids = base.ids + [str(n0 + i + 1) for i in range(len(sizes) - n0)]
    if len(set(ids)) != len(ids):
        # initial ids collide with the numbering of new objects
        ids = base.ids + [f"new{n0 + i + 1}" for i in range(len(sizes) - n0)]
    weights = np.append(base.weights, np.zeros(len(sizes) - n0))
    catalog = Catalog.from_arrays(weights, sizes, values, ids)
    return Trace(catalog, objects), log


# ---------------------------------------------------------------------------
# CSV trace format


def _fmt_float(x: float) -> str:
    return repr(float(x))


def save_trace(trace: Trace) -> bytes:
    """Serialise to the trace CSV format; size/value only on first occurrence."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    seen = set()
    cat = trace.catalog
    times = trace.times.tolist() if trace.times is not None else None
    for i, k in enumerate(trace.objects.tolist()):
        t = "" if times is None else _fmt_float(times[i])
        e = cat.entries[k]
        if k in seen:
            w.writerow((t, e.id, "", ""))
        else:
            seen.add(k)
            w.writerow((t, e.id, e.size, _fmt_float(e.value)))
    return buf.getvalue().encode("utf-8")


def write_trace(trace: Trace, path) -> None:
    with open(path, "wb") as f:
        f.write(save_trace(trace))


def _open_text(source):
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), False
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def load_trace(source) -> Trace:
    """Parse a trace CSV from a path, bytes, or a text/binary stream.

    Columns ``size`` and ``value`` may be left out of the header entirely, in
    which case every object gets size 1 and value 1.0.  When the column is
    present, the first occurrence of an object must fill it in.
    """
    f, owned = _open_text(source)
    try:
        rows = csv.reader(f)
        try:
            header = [h.strip() for h in next(rows)]
        except StopIteration:
            raise TraceFormatError("missing header", line=1)
        if "object" not in header:
            raise SchemaError("header lacks an 'object' column", line=1)
        unknown = set(header) - set(CSV_HEADER)
        if unknown:
            raise SchemaError(f"unknown columns {sorted(unknown)}", line=1)
        col = {h: i for i, h in enumerate(header)}
        index: dict[str, int] = {}
        sizes, values, counts = [], [], []
        objects, times = [], []
        timed = None
        for lineno, row in enumerate(rows, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
            oid = row[col["object"]].strip()
            if not oid:
                raise TraceFormatError("empty object id", lineno)
            t_raw = row[col["time"]].strip() if "time" in col else ""
            if timed is None:
                timed = bool(t_raw)
            elif timed != bool(t_raw):
                raise TraceFormatError("time must be given on every line or on none", lineno)
            if timed:
                try:
                    t = float(t_raw)
                except ValueError:
                    raise TraceFormatError(f"bad time {t_raw!r}", lineno) from None
                if not (t >= 0 and math.isfinite(t)) or (times and t < times[-1]):
                    raise TraceFormatError(f"time {t_raw!r} is negative or decreasing", lineno)
                times.append(t)
            s_raw = row[col["size"]].strip() if "size" in col else ""
            v_raw = row[col["value"]].strip() if "value" in col else ""
            k = index.get(oid)
            if k is None:
                if "size" in col and not s_raw:
                    raise SchemaError(f"first occurrence of {oid!r} lacks a size", lineno)
                try:
                    size = int(s_raw) if s_raw else 1
                    value = float(v_raw) if v_raw else 1.0
                except ValueError:
                    raise TraceFormatError(f"bad size/value {s_raw!r}/{v_raw!r}", lineno) from None
                if size < 1 or not (value >= 0 and math.isfinite(value)):
                    raise TraceFormatError(f"size must be >= 1 and value >= 0 for {oid!r}", lineno)
                k = index[oid] = len(sizes)
                sizes.append(size)
                values.append(value)
                counts.append(0)
            else:
                try:
                    if s_raw and int(s_raw) != sizes[k]:
                        raise TraceFormatError(f"size of {oid!r} changed", lineno)
                    if v_raw and float(v_raw) != values[k]:
                        raise TraceFormatError(f"value of {oid!r} changed", lineno)
                except ValueError:
                    raise TraceFormatError(f"bad size/value {s_raw!r}/{v_raw!r}", lineno) from None
            counts[k] += 1
            objects.append(k)
    finally:
        if owned:
            f.close()
    catalog = Catalog.from_arrays(counts, sizes, values, list(index))
    return Trace(catalog, objects, times if timed else None)


def trace_from_ids(ids: Sequence, sizes=None, values=None, times=None) -> Trace:
    """Build a trace from a sequence of object ids (first-appearance catalog order).

    ``sizes``/``values`` map id -> size/value; missing ids default to 1.
    """
    order: dict[str, int] = {}
    objs = []
    for o in ids:
        objs.append(order.setdefault(str(o), len(order)))
    sizes = {str(k): v for k, v in (sizes or {}).items()}
    values = {str(k): v for k, v in (values or {}).items()}
    counts = np.bincount(objs, minlength=len(order)) if objs else np.zeros(0)
    cat = Catalog.from_arrays(
        counts,
        [sizes.get(o, 1) for o in order],
        [values.get(o, 1.0) for o in order],
        list(order),
    )
    return Trace(cat, objs, times)
