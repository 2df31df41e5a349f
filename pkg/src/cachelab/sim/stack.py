"""One-pass hit-ratio curves for stack algorithms (LRU, LFU).

Every request gets a stack depth: the total size of the objects ranked at
or above the requested object just before the request.  A request hits in a
cache of capacity ``C`` iff its depth is at most ``C``.

Both policies are expressed through a fixed ranking key per request.  LRU
ranks by recency; LFU ranks by request count, and among equal counts the
object that reached its count earlier ranks higher (this is LFU with
``tie_break='newest'`` eviction, which makes LFU a stack algorithm).  The
depths are then prefix sums over the currently active keys, maintained in a
Fenwick tree over the static key universe.

With unit sizes the result equals independent per-capacity simulation.
With variable sizes the LRU depths are exact as long as every object fits
the capacity in question; LFU depths are an approximation.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ..errors import UnsupportedPolicy
from ..workload import Trace
from .engine import SimReport, batch_stderr
from .policies import Kind, parse_kind

INF_DEPTH = np.iinfo(np.int64).max


@numba.njit(cache=True)
def _depths(pos, prev, w):
    n = len(pos)
    tree = np.zeros(n + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    after = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = prev[i]
        if j < 0:
            out[i] = INF_DEPTH
        else:
            # prefix sum over positions 0..pos[j]
            s = 0
            x = pos[j] + 1
            while x > 0:
                s += tree[x]
                x -= x & (-x)
            out[i] = s
            x = pos[j] + 1
            while x <= n:
                tree[x] -= w[i]
                x += x & (-x)
        x = pos[i] + 1
        while x <= n:
            tree[x] += w[i]
            x += x & (-x)
        s = 0
        x = pos[i] + 1
        while x > 0:
            s += tree[x]
            x -= x & (-x)
        after[i] = s
    return out, after


def previous_occurrence(objs: np.ndarray) -> np.ndarray:
    """Index of the previous request to the same object, or -1."""
    n = len(objs)
    order = np.argsort(objs, kind="stable")
    prev = np.full(n, -1, dtype=np.int64)
    same = objs[order[1:]] == objs[order[:-1]]
    prev[order[1:][same]] = order[:-1][same]
    return prev


def request_counts(objs: np.ndarray) -> np.ndarray:
    """Running request count of the requested object, including this request."""
    n = len(objs)
    order = np.argsort(objs, kind="stable")
    sorted_objs = objs[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_objs)) + 1] if n else np.zeros(0, np.int64)
    run_start = np.repeat(starts, np.diff(np.r_[starts, n]))
    counts = np.empty(n, dtype=np.int64)
    counts[order] = np.arange(n) - run_start + 1
    return counts


def stack_depths(policy, trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """Per-request stack depth in bytes before and after the request.

    The depth before is ``INF_DEPTH`` for first references.  A miss loads
    the object into a cache of capacity ``C`` iff the depth after is <= C.
    """
    kind = parse_kind(getattr(policy, "kind", policy))
    objs = np.asarray(trace.objects, dtype=np.int64)
    n = len(objs)
    idx = np.arange(n, dtype=np.int64)
    if kind is Kind.LRU:
        pos = n - 1 - idx
    elif kind is Kind.LFU:
        order = np.lexsort((idx, -request_counts(objs)))
        pos = np.empty(n, dtype=np.int64)
        pos[order] = idx
    else:
        raise UnsupportedPolicy(f"{kind.value} is not a stack algorithm")
    w = trace.catalog.sizes[objs].astype(np.int64)
    return _depths(pos, previous_occurrence(objs), w)


def hrc_sweep_stack(policy, trace: Trace, capacities, warmup_fraction: float = 0.1) -> list[SimReport]:
    """Hit-ratio curve for every capacity in one pass over the trace."""
    kind = parse_kind(getattr(policy, "kind", policy))
    depth, after = stack_depths(kind, trace)
    R = len(trace)
    w = int(math.floor(warmup_fraction * R))
    d = depth[w:]
    # a hit never moves an object down, so every hit also has after <= C
    a = np.sort(after[w:])
    objs = trace.objects[w:]
    sizes = trace.catalog.sizes[objs].astype(np.float64)
    values = trace.catalog.values[objs]
    order = np.argsort(d, kind="stable")
    ds = d[order]
    cum_s = np.r_[0.0, np.cumsum(sizes[order])]
    cum_v = np.r_[0.0, np.cumsum(values[order])]
    tot_s, tot_v = sizes.sum(), values.sum()
    counted = R - w
    name = "LFU" if kind is Kind.LFU else "LRU"
    out = []
    for cap in capacities:
        c = INF_DEPTH - 1 if math.isinf(cap) else int(cap)
        h = int(np.searchsorted(ds, c, side="right"))
        out.append(SimReport(
            policy=name,
            capacity=cap if math.isinf(cap) else int(cap),
            requests=R,
            hits=h,
            misses=counted - h,
            uploads=int(np.searchsorted(a, c, side="right")) - h,
            ohr=h / counted if counted else math.nan,
            bhr=float(cum_s[h] / tot_s) if tot_s > 0 else math.nan,
            vhr=float(cum_v[h] / tot_v) if tot_v != 0 else math.nan,
            warmup_excluded=w,
            ohr_stderr=batch_stderr(d <= c),
        ))
    return out
