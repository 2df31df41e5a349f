"""Offline bounds on the achievable hit ratio.

* :func:`static_knapsack_bound` - fractional knapsack over IRM scores.
* :func:`dynamic_popularity_bound` - the same, request by request, for a
  churn workload.
* :func:`belady` - farthest-next-use replacement for unit sizes.
* :func:`knapsack_2d_bounds` - greedy packing of per-hit rectangles
  (interval length x object size) into the capacity x time plane.
* :func:`exhaustive_offline_optimum` - exact optimum for tiny traces.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidArgument, ResourceLimit, UnsupportedPolicy
from .markov.product_form import check_pmf
from .workload import ChurnLog, Trace


# ---------------------------------------------------------------------------
# IRM knapsack bounds


@dataclass(frozen=True)
class KnapsackBound:
    bound: float  # value hit ratio bound
    L: int  # number of whole objects in the greedy prefix
    q: float  # fraction of object L+1 that fits
    order: np.ndarray  # catalog indices ranked by score


def _greedy_fill(p, s, v, M):
    """Return (numerator, L, q, order) of the fractional knapsack."""
    ok = s <= M
    score = np.where(ok, v * p / s, -np.inf)
    order = np.argsort(-score, kind="stable")
    order = order[ok[order]]
    cs = np.cumsum(s[order])
    L = int(np.searchsorted(cs, M, side="right"))
    num = float((p[order[:L]] * v[order[:L]]).sum())
    q = 0.0
    if L < len(order):
        free = M - (cs[L - 1] if L else 0)
        q = float(free / s[order[L]])
        num += q * p[order[L]] * v[order[L]]
    return num, L, q, order


def static_knapsack_bound(pmf, sizes, values, M) -> KnapsackBound:
    """Upper bound on the IRM value hit ratio of any policy.

    Objects are ranked by ``v_k p_k / s_k``; the cache is filled greedily and
    the first object that does not fit contributes the fraction ``q`` that
    does.  Objects larger than ``M`` are excluded.  With unit sizes and
    values this is the sum of the ``M`` largest probabilities.
    """
    p = check_pmf(pmf)
    s = np.asarray(sizes, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if s.shape != p.shape or v.shape != p.shape:
        raise InvalidArgument("pmf, sizes and values must have equal length")
    if np.any(s < 1) or np.any(v < 0):
        raise InvalidArgument("sizes must be >= 1 and values >= 0")
    if M < 0:
        raise InvalidArgument("M must be >= 0")
    num, L, q, order = _greedy_fill(p, s, v, M)
    den = float(p @ v)
    return KnapsackBound(num / den if den > 0 else 0.0, L, q, order)


@dataclass(frozen=True)
class DynamicBound:
    per_request: np.ndarray  # numerator term of every request
    denominators: np.ndarray  # total expected value of every request
    bound: float  # sum of numerators / sum of denominators


def dynamic_popularity_bound(log: ChurnLog, sizes, values, M) -> DynamicBound:
    """Value hit ratio bound under popularity churn.

    For every request the objects existing at that time are ranked by
    ``v p / s`` under the pmf in force (conditional on an old object being
    requested), filled greedily, and the result is discounted by
    ``1 - p_new`` since a request to a new object is always a miss.
    """
    if log is None:
        raise InvalidArgument("a churn log is required")
    s_all = np.asarray(sizes, dtype=np.float64)
    v_all = np.asarray(values, dtype=np.float64)
    R = log.n_requests
    num = np.zeros(R)
    den = np.zeros(R)
    keep = 1.0 - log.p_new
    for start, stop, pmf in log.segments():
        n = len(pmf)
        if n == 0:
            continue
        if n > len(s_all) or n > len(v_all):
            raise InvalidArgument("sizes/values do not cover all objects in the churn log")
        s, v = s_all[:n], v_all[:n]
        fill, _, _, _ = _greedy_fill(pmf, s, v, M)
        num[start:stop] = keep * fill
        den[start:stop] = float(pmf @ v)
    total = den.sum()
    return DynamicBound(num, den, float(num.sum() / total) if total > 0 else 0.0)


# ---------------------------------------------------------------------------
# Belady


def next_use(objs: np.ndarray) -> np.ndarray:
    """Index of the next request to the same object (``len(objs)`` if none)."""
    n = len(objs)
    order = np.argsort(objs, kind="stable")
    nxt = np.full(n, n, dtype=np.int64)
    same = objs[order[1:]] == objs[order[:-1]]
    nxt[order[:-1][same]] = order[1:][same]
    return nxt


def belady(trace: Trace, M: int) -> tuple[int, float]:
    """Hit count and hit ratio of clairvoyant replacement (unit sizes).

    On a miss the object is inserted only if its next request comes before
    the next request of some resident; the resident requested farthest in
    the future is evicted.
    """
    if np.any(trace.catalog.sizes[np.unique(trace.objects)] != 1):
        raise UnsupportedPolicy("belady requires unit sizes; use knapsack_2d_bounds")
    objs = trace.objects
    R = len(objs)
    nxt = next_use(objs).tolist()
    current = {}  # resident -> its next use
    heap = []  # (-next_use, obj), lazy
    hits = 0
    for i, k in enumerate(objs.tolist()):
        nu = nxt[i]
        if k in current:
            hits += 1
        elif M <= 0 or nu >= R:
            continue
        elif len(current) >= M:
            while -heap[0][0] != current.get(heap[0][1], -1):
                heapq.heappop(heap)
            far, victim = heap[0]
            if nu >= -far:
                continue
            heapq.heappop(heap)
            del current[victim]
        current[k] = nu
        heapq.heappush(heap, (-nu, k))
        if len(heap) > 4 * M + 64:
            heap = [(-u, x) for x, u in current.items()]
            heapq.heapify(heap)
    return hits, hits / R if R else math.nan


# ---------------------------------------------------------------------------
# 2D knapsack


@dataclass
class BoundReport:
    v_lower: float
    v_upper: float
    v_total: float  # value of all re-references (the requests that can hit)
    vhr_lower: float
    vhr_upper: float
    v_requests: float  # value of all requests, first references included
    placements: list = field(default_factory=list)  # (object id, m, n) accepted by V-
    occupancy_lower: np.ndarray | None = None
    occupancy_upper: np.ndarray | None = None


def request_intervals(trace: Trace, per_interval_values=None):
    """All re-reference intervals ``[m, n)`` as parallel arrays.

    Returns ``(obj, m, n, size, value)`` sorted by the greedy order: value
    density ``v / ((n - m) s)`` descending, then shorter interval, earlier
    start, smaller object index.  ``per_interval_values`` is indexed by the
    closing request ``n``.
    """
    objs = np.asarray(trace.objects, dtype=np.int64)
    R = len(objs)
    nxt = next_use(objs)
    m = np.flatnonzero(nxt < R)
    n = nxt[m]
    obj = objs[m]
    size = trace.catalog.sizes[obj].astype(np.int64)
    if per_interval_values is None:
        value = trace.catalog.values[obj].astype(np.float64)
    else:
        pv = np.asarray(per_interval_values, dtype=np.float64)
        if pv.shape != (R,):
            raise InvalidArgument("per_interval_values must have one entry per request")
        value = pv[n]
    if np.any(value < 0):
        raise InvalidArgument("interval values must be >= 0")
    A = n - m
    score = value / (A * size)
    order = np.lexsort((obj, m, A, -score))
    return obj[order], m[order], n[order], size[order], value[order]


@numba.njit(cache=True)
def _apply(t, d, w, p, x):
    t[p] += x
    if p < w:
        d[p] += x


@numba.njit(cache=True)
def _pull(t, d, w, p):
    while p > 1:
        p >>= 1
        t[p] = max(t[2 * p], t[2 * p + 1]) + d[p]


@numba.njit(cache=True)
def _push(t, d, w, h, p):
    for s in range(h, 0, -1):
        i = p >> s
        if d[i] != 0:
            _apply(t, d, w, 2 * i, d[i])
            _apply(t, d, w, 2 * i + 1, d[i])
            d[i] = 0


@numba.njit(cache=True)
def _range_add(t, d, w, h, lo, hi, x):
    lo += w
    hi += w
    l0, r0 = lo, hi
    while lo < hi:
        if lo & 1:
            _apply(t, d, w, lo, x)
            lo += 1
        if hi & 1:
            hi -= 1
            _apply(t, d, w, hi, x)
        lo >>= 1
        hi >>= 1
    _pull(t, d, w, l0)
    _pull(t, d, w, r0 - 1)


@numba.njit(cache=True)
def _range_max(t, d, w, h, lo, hi):
    lo += w
    hi += w
    _push(t, d, w, h, lo)
    _push(t, d, w, h, hi - 1)
    best = np.int64(-1) << 62
    while lo < hi:
        if lo & 1:
            best = max(best, t[lo])
            lo += 1
        if hi & 1:
            hi -= 1
            best = max(best, t[hi])
        lo >>= 1
        hi >>= 1
    return best


@numba.njit(cache=True)
def _lower_pass(R, M, m, n, size):
    # iterative range-add / range-max segment tree over request slots
    w = 1
    h = 0
    while w < max(R, 1):
        w *= 2
        h += 1
    t = np.zeros(2 * w, dtype=np.int64)
    d = np.zeros(w, dtype=np.int64)
    accepted = np.zeros(len(m), dtype=np.bool_)
    for i in range(len(m)):
        if size[i] > M:
            continue
        if _range_max(t, d, w, h, m[i], n[i]) + size[i] <= M:
            _range_add(t, d, w, h, m[i], n[i], size[i])
            accepted[i] = True
    return accepted


@numba.njit(cache=True)
def _find(skip, t):
    r = t
    while skip[r] != r:
        r = skip[r]
    while skip[t] != r:
        nx = skip[t]
        skip[t] = r
        t = nx
    return r


@numba.njit(cache=True)
def _upper_pass(R, M, m, n, size):
    used = np.zeros(R + 1, dtype=np.int64)
    # skip[t] leads to the next slot that is not yet full
    skip = np.arange(R + 1)
    frac = np.zeros(len(m))
    for i in range(len(m)):
        s = size[i]
        if s > M:
            continue
        claimed = 0
        t = _find(skip, m[i])
        while t < n[i]:
            c = min(s, M - used[t])
            used[t] += c
            claimed += c
            if used[t] >= M:
                skip[t] = t + 1
            t = _find(skip, t + 1)
        frac[i] = claimed / ((n[i] - m[i]) * s)
    return frac, used[:R]


def knapsack_2d_bounds(trace: Trace, M, per_interval_values=None,
                       keep_profiles: bool = False) -> BoundReport:
    """Lower and upper bounds on the best achievable hit value.

    Every re-reference (a request whose object was requested before) can be
    a hit only if the object stays cached over the interval since that
    previous request, which occupies ``s`` bytes for ``n - m`` request slots.
    Intervals are visited in order of value density.  The lower bound accepts
    an interval if it fits entirely; the upper bound credits, slot by slot,
    whatever part of the rectangle still fits.  First references cannot hit
    and are not part of ``v_total``.
    """
    if M < 0:
        raise InvalidArgument("M must be >= 0")
    R = len(trace)
    obj, m, n, size, value = request_intervals(trace, per_interval_values)
    accepted = _lower_pass(R, int(M), m, n, size)
    frac, used_hi = _upper_pass(R, int(M), m, n, size)
    v_lo = float(value[accepted].sum())
    v_hi = float(frac @ value)
    v_total = float(value.sum())
    ids = trace.catalog.ids
    placements = [(ids[o], int(a), int(b)) for o, a, b in
                  zip(obj[accepted].tolist(), m[accepted].tolist(), n[accepted].tolist())]
    occ_lo = None
    if keep_profiles:
        diff = np.zeros(R + 1, dtype=np.int64)
        np.add.at(diff, m[accepted], size[accepted])
        np.add.at(diff, n[accepted], -size[accepted])
        occ_lo = np.cumsum(diff)[:R]
    v_req = float(trace.request_values.sum())
    return BoundReport(
        v_lower=v_lo,
        v_upper=v_hi,
        v_total=v_total,
        vhr_lower=v_lo / v_total if v_total > 0 else 0.0,
        vhr_upper=v_hi / v_total if v_total > 0 else 0.0,
        v_requests=v_req,
        placements=placements,
        occupancy_lower=occ_lo,
        occupancy_upper=used_hi if keep_profiles else None,
    )


def ttl_interval_values(trace: Trace, delta_t) -> np.ndarray:
    """Per-request interval values with a TTL that restarts at every request.

    The interval closing at request ``n`` keeps the object's value if the
    object is still valid at ``n`` (``t_n - t_m < delta_t``), otherwise 0.
    First references get 0.  ``delta_t`` is a scalar or per catalog index.
    """
    if trace.times is None:
        raise InvalidArgument("TTL-aware values need a timestamped trace")
    objs = np.asarray(trace.objects, dtype=np.int64)
    R = len(objs)
    dt = np.broadcast_to(np.asarray(delta_t, dtype=np.float64), (len(trace.catalog),))
    nxt = next_use(objs)
    m = np.flatnonzero(nxt < R)
    n = nxt[m]
    out = np.zeros(R)
    alive = trace.times[n] - trace.times[m] < dt[objs[m]]
    out[n] = np.where(alive, trace.catalog.values[objs[n]], 0.0)
    return out


def exhaustive_offline_optimum(trace: Trace, M, max_requests: int = 20,
                               max_objects: int = 8, per_interval_values=None) -> float:
    """Exact maximum hit value by branch and bound over the intervals."""
    R = len(trace)
    if R > max_requests or trace.distinct() > max_objects:
        raise ResourceLimit(
            f"exhaustive search limited to R <= {max_requests} and <= {max_objects} objects")
    obj, m, n, size, value = request_intervals(trace, per_interval_values)
    keep = size <= M
    m, n, size, value = m[keep].tolist(), n[keep].tolist(), size[keep].tolist(), value[keep].tolist()
    K = len(m)
    suffix = np.r_[np.cumsum(value[::-1])[::-1], 0.0].tolist()
    used = [0] * R
    best = 0.0

    def rec(i, acc):
        nonlocal best
        if acc > best:
            best = acc
        if i == K or acc + suffix[i] <= best:
            return
        a, b, s = m[i], n[i], size[i]
        if max(used[a:b]) + s <= M:
            for t in range(a, b):
                used[t] += s
            rec(i + 1, acc + value[i])
            for t in range(a, b):
                used[t] -= s
        rec(i + 1, acc)

    rec(0, 0.0)
    return best
