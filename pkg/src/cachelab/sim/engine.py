"""Trace-driven simulation loop and hit-ratio accounting."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InvalidArgument, UndefinedRatio
from ..workload import Trace
from .policies import HIT, UPLOAD, PolicyConfig, build, parse_kind


class TtlKind(str, Enum):
    RESET_PER_MISS = "RESET_PER_MISS"
    RESET_PER_REQUEST = "RESET_PER_REQUEST"
    PERIODIC = "PERIODIC"


@dataclass(frozen=True)
class TtlFlag:
    """Hard TTL invalidation on top of a capacity-limited policy.

    A resident object whose timer has expired is treated as a miss: it is
    fetched again (an upload) and its timer restarts.  ``delta_t`` is a
    scalar or a per-catalog-index array of seconds.
    """

    kind: TtlKind
    delta_t: object
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", TtlKind(str(self.kind).upper()))


@dataclass
class SimReport:
    policy: str
    capacity: int
    requests: int
    hits: int
    misses: int
    uploads: int
    ohr: float
    bhr: float
    vhr: float
    warmup_excluded: int
    ohr_stderr: float = math.nan
    bhr_stderr: float = math.nan
    vhr_stderr: float = math.nan
    upload_stderr: float = math.nan
    hit_series: list[float] | None = None
    throughput: float = math.nan

    @property
    def counted(self) -> int:
        return self.requests - self.warmup_excluded

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["upload_ratio"] = self.uploads / self.counted if self.counted else math.nan
        return d


def upload_ratio(report: SimReport) -> float:
    """Fraction of counted requests that loaded an object into the cache."""
    if report.counted <= 0:
        raise UndefinedRatio("no counted requests")
    return report.uploads / report.counted


def batch_stderr(x: np.ndarray, batches: int = 20) -> float:
    """Standard error of the mean of ``x`` by non-overlapping batch means."""
    n = len(x) // batches
    if n < 2:
        return math.nan
    means = np.asarray(x[: n * batches], dtype=np.float64).reshape(batches, n).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def batch_ratio_stderr(num: np.ndarray, den: np.ndarray, batches: int = 20) -> float:
    """Standard error of ``sum(num) / sum(den)`` from batch ratios."""
    n = len(num) // batches
    if n < 2:
        return math.nan
    bn = np.asarray(num[: n * batches], dtype=np.float64).reshape(batches, n).sum(axis=1)
    bd = np.asarray(den[: n * batches], dtype=np.float64).reshape(batches, n).sum(axis=1)
    if np.any(bd == 0):
        return math.nan
    return float((bn / bd).std(ddof=1) / math.sqrt(batches))


def run_codes(policy: PolicyConfig, trace: Trace, capacity: int, ttl: TtlFlag | None = None,
              check: bool = False) -> np.ndarray:
    """Per-request outcome codes (0 miss, 1 hit, 2 miss with upload)."""
    if not isinstance(policy, PolicyConfig):
        policy = PolicyConfig(parse_kind(policy))
    cat = trace.catalog
    state = build(policy, capacity, cat.sizes, cat.values)
    objs = trace.objects.tolist()
    if check:
        out = bytearray()
        for k in objs:
            out.append(state.access(k))
            state.check()
        return np.frombuffer(bytes(out), dtype=np.uint8)
    if ttl is None:
        return np.frombuffer(bytes(bytearray(map(state.access, objs))), dtype=np.uint8)
    return _run_ttl(state, trace, ttl)


def _run_ttl(state, trace: Trace, ttl: TtlFlag) -> np.ndarray:
    if trace.times is None:
        raise InvalidArgument("TTL invalidation requires a timestamped trace")
    n = len(trace.catalog)
    dt = np.broadcast_to(np.asarray(ttl.delta_t, dtype=np.float64), (n,)).tolist()
    if any(not (d > 0) for d in dt):
        raise InvalidArgument("delta_t must be > 0")
    expiry = [0.0] * n
    kind, off = ttl.kind, ttl.offset
    per_request = kind is TtlKind.RESET_PER_REQUEST
    periodic = kind is TtlKind.PERIODIC
    out = bytearray(len(trace))
    for i, (k, t) in enumerate(zip(trace.objects.tolist(), trace.times.tolist())):
        code = state.access(k)
        if code == HIT and t >= expiry[k]:
            code = UPLOAD
        if code == UPLOAD or (code == HIT and per_request):
            if periodic:
                expiry[k] = off + (math.floor((t - off) / dt[k]) + 1) * dt[k]
            else:
                expiry[k] = t + dt[k]
        out[i] = code
    return np.frombuffer(bytes(out), dtype=np.uint8)


def simulate(policy: PolicyConfig, trace: Trace, capacity: int, warmup_fraction: float = 0.1,
             series_window: int | None = None, ttl: TtlFlag | None = None) -> SimReport:
    """Run ``policy`` over ``trace`` with a cache of ``capacity`` bytes.

    The first ``floor(warmup_fraction * R)`` requests warm the cache and are
    excluded from all counters.  ``series_window`` adds per-window hit rates
    over the counted requests.
    """
    if not (0 <= warmup_fraction < 1):
        raise InvalidArgument("warmup_fraction must lie in [0, 1)")
    if not isinstance(policy, PolicyConfig):
        policy = PolicyConfig(parse_kind(policy))
    if capacity < 0:
        raise InvalidArgument("capacity must be >= 0")
    t0 = time.perf_counter()
    codes = run_codes(policy, trace, capacity, ttl)
    elapsed = time.perf_counter() - t0
    return report_from_codes(policy.name, capacity, trace, codes, warmup_fraction,
                             series_window, elapsed)


def report_from_codes(name, capacity, trace: Trace, codes: np.ndarray, warmup_fraction=0.1,
                      series_window=None, elapsed=math.nan) -> SimReport:
    R = len(codes)
    w = int(math.floor(warmup_fraction * R))
    c = codes[w:]
    hit = c == HIT
    objs = trace.objects[w:]
    sizes = trace.catalog.sizes[objs].astype(np.float64)
    values = trace.catalog.values[objs]
    hits = int(hit.sum())
    uploads = int((c == UPLOAD).sum())
    counted = R - w
    ohr = hits / counted if counted else math.nan
    tot_s = sizes.sum()
    bhr = float(sizes[hit].sum() / tot_s) if tot_s > 0 else math.nan
    tot_v = values.sum()
    vhr = float(values[hit].sum() / tot_v) if tot_v != 0 else math.nan
    series = None
    if series_window:
        nwin = counted // series_window
        series = hit[: nwin * series_window].reshape(nwin, series_window).mean(axis=1).tolist()
    return SimReport(
        policy=name,
        capacity=int(capacity),
        requests=R,
        hits=hits,
        misses=counted - hits,
        uploads=uploads,
        ohr=ohr,
        bhr=bhr,
        vhr=vhr,
        warmup_excluded=w,
        ohr_stderr=batch_stderr(hit),
        bhr_stderr=batch_ratio_stderr(np.where(hit, sizes, 0.0), sizes),
        vhr_stderr=batch_ratio_stderr(np.where(hit, values, 0.0), values),
        upload_stderr=batch_stderr(c == UPLOAD),
        hit_series=series,
        throughput=R / elapsed if elapsed and elapsed > 0 else math.nan,
    )
