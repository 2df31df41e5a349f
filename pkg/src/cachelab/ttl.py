"""TTL caches: hit ratios under Poisson requests, trace statistics for
periodic resets, TTL adaptation and occupancy.

Three timer disciplines are supported:

``RESET_PER_MISS``
    the timer starts when the object is loaded; hits do not extend it.
``RESET_PER_REQUEST``
    every request restarts the timer.
``PERIODIC``
    all copies expire at the end of fixed windows of length ``delta_t``.

A request arriving exactly at the expiry instant is a miss.  Pure TTL
caches have unbounded storage; time 0 is the start of a trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, OutOfRange
from .sim.engine import TtlKind, batch_stderr
from .workload import Catalog, Trace

RESET_PER_MISS = TtlKind.RESET_PER_MISS
RESET_PER_REQUEST = TtlKind.RESET_PER_REQUEST
PERIODIC = TtlKind.PERIODIC


def _kind(discipline) -> TtlKind:
    try:
        return TtlKind(str(getattr(discipline, "value", discipline)).upper())
    except ValueError:
        raise InvalidArgument(f"unknown TTL discipline {discipline!r}") from None


def _nonneg(*xs):
    out = [np.asarray(x, dtype=np.float64) for x in xs]
    for x in out:
        if np.any(x < 0) or np.any(np.isnan(x)):
            raise InvalidArgument("rates and TTL values must be >= 0")
    return out


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# Poisson closed forms


def ttl_hit_reset_per_miss(lam, delta_t):
    """``lam dt / (lam dt + 1)``."""
    lam, dt = _nonneg(lam, delta_t)
    x = lam * dt
    with np.errstate(invalid="ignore"):
        h = np.where(np.isinf(x), 1.0, x / (x + 1.0))
    return _ret(h)


def ttl_hit_reset_per_request(lam, delta_t):
    """``1 - exp(-lam dt)``."""
    lam, dt = _nonneg(lam, delta_t)
    return _ret(-np.expm1(-lam * dt))


def ttl_hit_periodic(lam, delta_t):
    """Periodic reset with Poisson requests: ``(x - 1 + exp(-x)) / x``, ``x = lam dt``."""
    lam, dt = _nonneg(lam, delta_t)
    x = np.asarray(lam * dt, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        # expm1 keeps precision for small x, where the ratio tends to x/2
        h = np.where(x > 0, (x + np.expm1(-x)) / np.where(x > 0, x, 1.0), 0.0)
    h = np.where(np.isinf(x), 1.0, h)
    return _ret(h)


_HIT = {
    RESET_PER_MISS: ttl_hit_reset_per_miss,
    RESET_PER_REQUEST: ttl_hit_reset_per_request,
    PERIODIC: ttl_hit_periodic,
}


def ttl_hit(discipline, lam, delta_t):
    return _HIT[_kind(discipline)](lam, delta_t)


# ---------------------------------------------------------------------------
# periodic resets on arbitrary request timing


@dataclass(frozen=True)
class IntervalStats:
    ids: list  # object ids covered
    mean_count: np.ndarray  # E[c_k(dt_k)]
    empty_fraction: np.ndarray  # p_k^0(dt_k)
    delta_t: np.ndarray  # window length per object
    windows: np.ndarray  # number of complete windows per object

    def __post_init__(self):
        E, p0 = self.mean_count, self.empty_fraction
        if np.any(E < 0) or np.any((p0 < 0) | (p0 > 1)):
            raise InvalidArgument("E must be >= 0 and p0 in [0, 1]")
        if np.any((E == 0) & (p0 < 1)):
            raise InvalidArgument("inconsistent stats: E = 0 requires p0 = 1")


def periodic_reset_hit_ratio(stats: IntervalStats) -> tuple[np.ndarray, float]:
    """Per-object hit ratios ``(E - 1 + p0) / E`` and the aggregate.

    The aggregate normalises every object by its window length, so objects
    with different ``delta_t`` are weighted by their request rate.  Objects
    with ``E = 0`` contribute to neither sum (their per-object ratio is NaN).
    """
    E, p0, dt = stats.mean_count, stats.empty_fraction, stats.delta_t
    live = E > 0
    per = np.full(len(E), np.nan)
    per[live] = (E[live] - 1.0 + p0[live]) / E[live]
    num = ((E[live] - 1.0 + p0[live]) / dt[live]).sum()
    den = (E[live] / dt[live]).sum()
    return per, float(num / den) if den > 0 else math.nan


def trace_interval_stats(trace: Trace, delta_t, offset: float = 0.0,
                         horizon: float | None = None) -> IntervalStats:
    """Window statistics for the objects requested in ``trace``.

    Windows ``[offset + i dt_k, offset + (i+1) dt_k)`` tile ``[offset,
    horizon)``; the last, incomplete window is discarded.  ``horizon``
    defaults to the last timestamp.  Objects without requests are omitted.
    """
    if trace.times is None:
        raise InvalidArgument("trace_interval_stats needs timestamps")
    n = len(trace.catalog)
    dt_all = np.broadcast_to(np.asarray(delta_t, dtype=np.float64), (n,))
    if np.any(dt_all <= 0):
        raise InvalidArgument("delta_t must be > 0")
    t = trace.times - offset
    end = (trace.times[-1] if len(trace) else offset) if horizon is None else horizon
    span = max(end - offset, 0.0)
    objs = trace.objects
    seen = np.unique(objs)
    E = np.zeros(len(seen))
    p0 = np.ones(len(seen))
    W = np.zeros(len(seen), dtype=np.int64)
    order = np.argsort(objs, kind="stable")
    bounds = np.searchsorted(objs[order], seen, side="left")
    bounds = np.r_[bounds, len(objs)]
    for i, k in enumerate(seen.tolist()):
        dt = dt_all[k]
        nwin = int(math.floor(span / dt))
        W[i] = nwin
        if nwin == 0:
            continue
        tk = t[order[bounds[i]:bounds[i + 1]]]
        win = np.floor(tk / dt).astype(np.int64)
        win = win[(win >= 0) & (win < nwin)]
        counts = np.bincount(win, minlength=nwin)
        E[i] = counts.mean()
        p0[i] = float((counts == 0).mean())
    ids = trace.catalog.ids
    return IntervalStats([ids[k] for k in seen.tolist()], E, p0, dt_all[seen].copy(), W)


# ---------------------------------------------------------------------------
# event simulation


def ttl_trace_codes(trace: Trace, discipline, delta_t, offset: float = 0.0) -> np.ndarray:
    """Hit (True) / miss (False) of every request in a pure TTL cache."""
    if trace.times is None:
        raise InvalidArgument("TTL simulation needs timestamps")
    kind = _kind(discipline)
    n = len(trace.catalog)
    dt_all = np.broadcast_to(np.asarray(delta_t, dtype=np.float64), (n,))
    objs, times = trace.objects, trace.times
    hit = np.zeros(len(trace), dtype=bool)
    order = np.argsort(objs, kind="stable")
    sorted_objs = objs[order]
    starts = np.flatnonzero(np.r_[True, sorted_objs[1:] != sorted_objs[:-1]]) if len(objs) else []
    ends = np.r_[starts[1:], len(objs)] if len(objs) else []
    for a, b in zip(starts, ends):
        idx = order[a:b]
        hit[idx] = _object_hits(times[idx], dt_all[sorted_objs[a]], kind, offset)
    return hit


def _object_hits(t: np.ndarray, dt: float, kind: TtlKind, offset: float) -> np.ndarray:
    n = len(t)
    if dt <= 0 or n == 0:
        return np.zeros(n, dtype=bool)
    if kind is RESET_PER_REQUEST:
        h = np.zeros(n, dtype=bool)
        h[1:] = np.diff(t) < dt
        return h
    if kind is PERIODIC:
        win = np.floor((t - offset) / dt)
        h = np.zeros(n, dtype=bool)
        h[1:] = win[1:] == win[:-1]
        return h
    # per miss: jump from each miss to the first request at or after expiry
    nxt = np.searchsorted(t, t + dt, side="left").tolist()
    h = np.ones(n, dtype=bool)
    i = 0
    while i < n:
        h[i] = False
        i = nxt[i]
    return h


def poisson_times(lam: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.cumsum(rng.exponential(1.0 / lam, n))


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float


def simulate_ttl_prm(lam: float, delta_t: float, discipline, n_requests: int,
                     seed: int) -> McEstimate:
    """Event simulation of one object with Poisson requests of rate ``lam``."""
    if lam <= 0:
        raise InvalidArgument("lam must be > 0")
    rng = np.random.default_rng(seed)
    t = poisson_times(lam, n_requests, rng)
    h = _object_hits(t, delta_t, _kind(discipline), 0.0)
    # the very first request is a cold miss; drop it
    h = h[1:]
    return McEstimate(float(h.mean()), batch_stderr(h))


def generate_prm_trace(catalog: Catalog, total_rate: float, horizon: float, seed: int) -> Trace:
    """Poisson request stream over ``[0, horizon)``: object ``k`` has rate
    ``total_rate * p_k``."""
    if total_rate <= 0 or horizon <= 0:
        raise InvalidArgument("total_rate and horizon must be > 0")
    rng = np.random.default_rng(seed)
    n = rng.poisson(total_rate * horizon)
    times = np.sort(rng.random(n) * horizon)
    objs = rng.choice(len(catalog), size=n, p=catalog.pmf)
    return Trace(catalog, objs, times)


# ---------------------------------------------------------------------------
# occupancy and adaptation


def ttl_occupancy(lambdas, discipline, delta_t) -> float:
    """Expected number of valid objects in a pure TTL cache (Poisson requests).

    The fraction of time each object is valid is ``x/(x+1)`` for resets per
    miss (renewal cycle of mean ``dt + 1/lam``), ``1 - exp(-x)`` for resets per
    request (a request within the last ``dt``), and ``1 - (1 - exp(-x))/x``
    for periodic resets (a request since the window start), ``x = lam dt``.
    """
    lam, dt = _nonneg(lambdas, delta_t)
    lam, dt = np.broadcast_arrays(lam, dt)
    kind = _kind(discipline)
    x = lam * dt
    if kind is RESET_PER_MISS:
        f = ttl_hit_reset_per_miss(lam, dt)
    elif kind is RESET_PER_REQUEST:
        f = ttl_hit_reset_per_request(lam, dt)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(x > 0, 1.0 + np.expm1(-x) / np.where(x > 0, x, 1.0), 0.0)
        f = np.where(np.isinf(x), 1.0, f)
    return float(np.sum(f))


def simulate_ttl_occupancy(lam: float, delta_t: float, discipline, horizon: float,
                           seed: int, batches: int = 20) -> McEstimate:
    """Monte Carlo fraction of time a single object is valid."""
    kind = _kind(discipline)
    rng = np.random.default_rng(seed)
    n = rng.poisson(lam * horizon)
    t = np.sort(rng.random(n) * horizon)
    # valid intervals [start, stop) of the object
    if kind is RESET_PER_REQUEST:
        start, stop = t, np.minimum(t + delta_t, np.r_[t[1:], np.inf])
    elif kind is PERIODIC:
        win = np.floor(t / delta_t)
        first = np.r_[True, win[1:] != win[:-1]]
        start, stop = t[first], (win[first] + 1) * delta_t
    else:
        miss = ~_object_hits(t, delta_t, kind, 0.0)
        start = t[miss]
        stop = start + delta_t
    edges = np.linspace(0.0, horizon, batches + 1)
    frac = np.empty(batches)
    for b in range(batches):
        lo, hi = edges[b], edges[b + 1]
        frac[b] = np.clip(np.minimum(stop, hi) - np.maximum(start, lo), 0, None).sum() / (hi - lo)
    return McEstimate(float(frac.mean()), float(frac.std(ddof=1) / math.sqrt(batches)))


def ttl_adapt(lambdas, target: float, discipline, kind: str = "hit",
              per_object: bool = False):
    """TTL that reaches ``target`` hit ratio (``kind='hit'``) or expected
    number of valid objects (``kind='occupancy'``).

    ``lambdas`` are per-object Poisson rates; pass ``trace_rates(trace)`` to
    adapt to a trace.  The aggregate hit ratio weights objects by their rate.
    With ``per_object=True`` (hit targets only) every object gets its own
    ``dt_k`` with hit ratio ``target``.
    """
    lam = np.atleast_1d(_nonneg(lambdas)[0])
    disc = _kind(discipline)
    f_hit = _HIT[disc]
    if kind not in ("hit", "occupancy"):
        raise InvalidArgument("kind must be 'hit' or 'occupancy'")
    live = lam > 0
    if not live.any():
        raise OutOfRange("no object has a positive rate", supremum=0.0)
    if kind == "hit":
        sup = 1.0
        if not (0 <= target < sup):
            raise OutOfRange(f"hit target {target} outside [0, 1)", supremum=sup)
        if per_object:
            out = np.full(len(lam), np.inf)
            out[live] = [_invert(lambda d, l=l: f_hit(l, d), target) for l in lam[live]]
            return out
        tot = lam.sum()

        def g(d):
            return float(np.sum(lam * f_hit(lam, d)) / tot)
    else:
        if per_object:
            raise InvalidArgument("per-object TTLs are only defined for hit targets")
        sup = float(np.count_nonzero(live))
        if not (0 <= target < sup):
            raise OutOfRange(f"occupancy target {target} outside [0, {sup})", supremum=sup)

        def g(d):
            return ttl_occupancy(lam, disc, d)
    return _invert(g, target)


def _invert(g, target):
    if target == 0:
        return 0.0
    hi = 1.0
    while g(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise OutOfRange("target not reachable", supremum=g(hi))
    return brentq(lambda d: g(d) - target, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def trace_rates(trace: Trace, horizon: float | None = None) -> np.ndarray:
    """Per-object request rates estimated as count / horizon."""
    if trace.times is None:
        raise InvalidArgument("rate estimation needs timestamps")
    h = horizon if horizon is not None else float(trace.times[-1]) if len(trace) else 0.0
    if h <= 0:
        raise InvalidArgument("horizon must be > 0")
    return np.bincount(trace.objects, minlength=len(trace.catalog)) / h


def consistency_discount(base_hit_ratio, discipline, rate, delta_t):
    """Worst-case hit ratio of a TTL-unaware policy under TTL invalidation:
    ``base * h_ttl(rate * delta_t)``."""
    b = np.asarray(base_hit_ratio, dtype=np.float64)
    if np.any((b < 0) | (b > 1)):
        raise InvalidArgument("base hit ratio must lie in [0, 1]")
    return _ret(b * ttl_hit(discipline, rate, delta_t))
