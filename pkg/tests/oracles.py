"""Slow, straightforward reference implementations used as test oracles.

Nothing here imports solver code from the package; each function restates
the model from first principles with plain lists, dicts and Fractions.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

MISS, HIT, UPLOAD = 0, 1, 2


# ---------------------------------------------------------------------------
# replacement policies on plain lists


def ref_lru(objs, sizes, cap):
    stack, out = [], []  # most recent last
    for k in objs:
        if k in stack:
            stack.remove(k)
            stack.append(k)
            out.append(HIT)
            continue
        if sizes[k] > cap:
            out.append(MISS)
            continue
        while sum(sizes[x] for x in stack) + sizes[k] > cap:
            stack.pop(0)
        stack.append(k)
        out.append(UPLOAD)
    return out


def ref_fifo(objs, sizes, cap):
    queue, out = [], []
    for k in objs:
        if k in queue:
            out.append(HIT)
            continue
        if sizes[k] > cap:
            out.append(MISS)
            continue
        while sum(sizes[x] for x in queue) + sizes[k] > cap:
            queue.pop(0)
        queue.append(k)
        out.append(UPLOAD)
    return out


def ref_cpr(objs, sizes, cap):
    """Clock per request; ring[0] is under the hand."""
    ring, out = [], []
    for k in objs:
        if k in ring or sizes[k] > cap:
            out.append(HIT if k in ring else MISS)
            ring = ring[1:] + ring[:1]
            continue
        while sum(sizes[x] for x in ring) + sizes[k] > cap:
            ring.pop(0)
        ring.append(k)
        out.append(UPLOAD)
    return out


def ref_lfu(objs, sizes, cap, tie="oldest", window=None, factor=None):
    """Count-gated LFU.  Residents are ranked by (score, tie key); the new
    object is admitted only if its score beats every resident set aside."""
    count, res, out = {}, {}, []  # res: k -> tie key
    hist = []
    factor = factor or [1.0] * len(sizes)
    for t, k in enumerate(objs):
        hist.append(k)
        if window is not None and len(hist) > window:
            count[hist[-window - 1]] -= 1
        count[k] = count.get(k, 0) + 1
        score = count[k] * factor[k]
        if k in res:
            if tie == "newest":
                res[k] = -t
            out.append(HIT)
            continue
        if sizes[k] > cap:
            out.append(MISS)
            continue
        ranked = sorted(res, key=lambda x: (count[x] * factor[x], res[x]))
        free = cap - sum(sizes[x] for x in res)
        taken = []
        for x in ranked:
            if free >= sizes[k]:
                break
            taken.append(x)
            free += sizes[x]
        if free < sizes[k] or any(count[x] * factor[x] >= score for x in taken):
            out.append(MISS)
            continue
        for x in taken:
            del res[x]
        res[k] = -t if tie == "newest" else t
        out.append(UPLOAD)
    return out


def ref_sgc(objs, sizes, values, cap, use_count=True, use_value=True, inv_size=True):
    ring, count, out = [], [0] * len(sizes), []

    def score(x):
        s = count[x] if use_count else 1.0
        if use_value:
            s *= values[x]
        if inv_size:
            s /= sizes[x]
        return s

    for k in objs:
        count[k] += 1
        if k in ring or sizes[k] > cap:
            out.append(HIT if k in ring else MISS)
            ring = ring[1:] + ring[:1]
            continue
        need = sum(sizes[x] for x in ring) + sizes[k] - cap
        cands, freed = [], 0
        for x in ring:
            if freed >= need:
                break
            cands.append(x)
            freed += sizes[x]
        if any(score(x) >= score(k) for x in cands):
            out.append(MISS)
            ring = ring[1:] + ring[:1]
            continue
        ring = ring[len(cands):] + [k]
        out.append(UPLOAD)
    return out


def ref_greedy_dual(objs, sizes, values, cap):
    """GDSF with H = L + c*v/s; ties evict the least recently set entry."""
    H, stamp, count, out = {}, {}, [0] * len(sizes), []
    L = 0.0
    for t, k in enumerate(objs):
        count[k] += 1
        sc = count[k] * values[k] / sizes[k]
        if k in H:
            H[k], stamp[k] = L + sc, t
            out.append(HIT)
            continue
        if sizes[k] > cap:
            out.append(MISS)
            continue
        while sum(sizes[x] for x in H) + sizes[k] > cap:
            v = min(H, key=lambda x: (H[x], stamp[x]))
            L = max(L, H.pop(v))
            del stamp[v]
        H[k], stamp[k] = L + sc, t
        out.append(UPLOAD)
    return out


# ---------------------------------------------------------------------------
# offline optimum


def ref_offline_opt(objs, sizes, values, cap):
    """Best total value of re-reference hits over all admission/eviction
    schedules; an object can only enter the cache when it is requested."""
    objs = tuple(objs)

    @lru_cache(maxsize=None)
    def best(i, cache):
        if i == len(objs):
            return 0.0
        k = objs[i]
        gain = values[k] if k in cache else 0.0
        pool = sorted(cache | {k})
        top = 0.0
        for r in range(len(pool) + 1):
            for keep in itertools.combinations(pool, r):
                if sum(sizes[x] for x in keep) <= cap:
                    top = max(top, best(i + 1, frozenset(keep)))
        return gain + top

    return best(0, frozenset())


def ref_belady_unit(objs, cap):
    """Furthest-next-use eviction, unit sizes; returns the hit count."""
    cache, hits = set(), 0
    for i, k in enumerate(objs):
        if k in cache:
            hits += 1
            continue
        rest = objs[i + 1:]
        if k not in rest:
            continue  # never admit an object that is not requested again
        if len(cache) < cap:
            cache.add(k)
            continue

        def nxt(x):
            return rest.index(x) if x in rest else math.inf

        far = max(cache, key=nxt)
        if nxt(far) > nxt(k):
            cache.remove(far)
            cache.add(k)
    return hits


# ---------------------------------------------------------------------------
# exact stationary analysis with rational arithmetic


def _gauss(A, b):
    """Solve ``A x = b`` exactly (square, nonsingular, Fractions)."""
    n = len(b)
    A = [row[:] for row in A]
    b = b[:]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        b[c], b[piv] = b[piv], b[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        b[c] *= inv
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
                b[r] -= f * b[c]
    return b


def _reach(trans, s):
    seen, todo = {s}, [s]
    while todo:
        for t in trans[todo.pop()]:
            if t not in seen:
                seen.add(t)
                todo.append(t)
    return seen


def _solve_stationary(states, trans, start):
    """Long-run distribution of a finite chain started in ``start``.

    ``trans[state] = {next_state: Fraction}``.  Closed classes are weighted
    by their absorption probability from ``start``.
    """
    reach = {s: _reach(trans, s) for s in states}
    closed = [s for s in states if all(s in reach[t] for t in reach[s])]
    classes = []
    for s in closed:
        if not any(s in c for c in classes):
            classes.append(frozenset(reach[s]))
    transient = [s for s in states if not any(s in c for c in classes)]
    # absorption probabilities a[s][c] for transient s
    weight = {}
    if start in transient:
        ti = {s: i for i, s in enumerate(transient)}
        for ci, cls in enumerate(classes):
            A = [[Fraction(int(i == j)) for j in range(len(transient))] for i in range(len(transient))]
            b = [Fraction(0)] * len(transient)
            for s in transient:
                for t, pr in trans[s].items():
                    if t in ti:
                        A[ti[s]][ti[t]] -= pr
                    elif t in cls:
                        b[ti[s]] += pr
            weight[cls] = _gauss(A, b)[ti[start]]
    else:
        weight = {c: Fraction(int(start in c)) for c in classes}
    pi = {s: Fraction(0) for s in states}
    for cls, w in weight.items():
        if w == 0:
            continue
        cs = sorted(cls, key=states.index)
        idx = {s: i for i, s in enumerate(cs)}
        n = len(cs)
        A = [[Fraction(0)] * n for _ in range(n)]
        for s in cs:
            for t, pr in trans[s].items():
                A[idx[t]][idx[s]] += pr
            A[idx[s]][idx[s]] -= 1
        A[-1] = [Fraction(1)] * n
        x = _gauss(A, [Fraction(0)] * (n - 1) + [Fraction(1)])
        for s, v in zip(cs, x):
            pi[s] = w * v
    return pi


def _step(policy, state, k, sizes, cap):
    """Successor distribution ``{state: Fraction}`` after a request to ``k``.

    States: LRU tuple most-recent-first, FIFO tuple newest-first, CPR tuple
    starting at the hand, RANDOM frozenset.
    """
    one = Fraction(1)
    if policy == "RANDOM":
        if k in state or sizes[k] > cap:
            return {state: one}
        out = {}

        def evict(cur, pr):
            if sum(sizes[x] for x in cur) + sizes[k] <= cap:
                nxt = frozenset(cur | {k})
                out[nxt] = out.get(nxt, 0) + pr
                return
            for x in cur:
                evict(cur - {x}, pr / len(cur))

        evict(state, one)
        return out
    if policy == "LRU":
        if k in state:
            return {(k,) + tuple(x for x in state if x != k): one}
        if sizes[k] > cap:
            return {state: one}
        rest = list(state)
        while sum(sizes[x] for x in rest) + sizes[k] > cap:
            rest.pop()
        return {(k,) + tuple(rest): one}
    if policy == "FIFO":
        if k in state or sizes[k] > cap:
            return {state: one}
        rest = list(state)
        while sum(sizes[x] for x in rest) + sizes[k] > cap:
            rest.pop()
        return {(k,) + tuple(rest): one}
    if policy == "CPR":
        if k in state or sizes[k] > cap:
            return {state[1:] + state[:1]: one}
        rest = list(state)
        while sum(sizes[x] for x in rest) + sizes[k] > cap:
            rest.pop(0)
        return {tuple(rest) + (k,): one}
    raise ValueError(policy)


def ref_chain(policy, pmf, sizes, cap):
    """Exact (OHR, BHR) as Fractions.  ``pmf`` entries should be Fractions."""
    pmf = [Fraction(p) for p in pmf]
    empty = frozenset() if policy == "RANDOM" else ()
    trans, todo = {}, [empty]
    while todo:
        s = todo.pop()
        if s in trans:
            continue
        nx = {}
        for k, p in enumerate(pmf):
            if p == 0:
                continue
            for t, q in _step(policy, s, k, sizes, cap).items():
                nx[t] = nx.get(t, 0) + p * q
        trans[s] = nx
        todo.extend(t for t in nx if t not in trans)
    states = list(trans)
    pi = _solve_stationary(states, trans, empty)
    ohr = sum(pi[s] * sum(pmf[k] for k in s) for s in states)
    byt = sum(pmf[k] * sizes[k] for k in range(len(pmf)))
    bhr = sum(pi[s] * sum(pmf[k] * sizes[k] for k in s) for s in states) / byt
    return ohr, bhr


# ---------------------------------------------------------------------------
# closed forms


def ref_lru_unit(p, M):
    """Unit-size LRU hit ratio by summing over ordered stack contents."""
    total = 0.0
    for perm in itertools.permutations(range(len(p)), M):
        pr, used = 1.0, 0.0
        for k in perm:
            pr *= p[k] / (1.0 - used)
            used += p[k]
        total += pr * used
    return total


def ref_product_form(content, M, weights=None):
    """Hit ratio of the product-form content distribution over M-subsets."""
    weights = content if weights is None else weights
    Z = H = 0.0
    for sub in itertools.combinations(range(len(content)), M):
        w = math.prod(content[k] for k in sub)
        Z += w
        H += w * sum(weights[k] for k in sub)
    return H / Z


def ref_multilevel(p, levels):
    """Ordered level contents with weight prod_j (prod_{k in level j} p_k)^(K-j),
    top level j = 0; unit sizes."""
    K = len(levels)
    N = len(p)
    Z = H = 0.0
    total = sum(levels)

    def rec(j, used, acc_w, acc_h):
        nonlocal Z, H
        if j == K:
            Z += acc_w
            H += acc_w * acc_h
            return
        for sub in itertools.combinations([k for k in range(N) if k not in used],
                                          levels[j]):
            w = math.prod(p[k] for k in sub) ** (K - j)
            rec(j + 1, used | set(sub), acc_w * w, acc_h + sum(p[k] for k in sub))

    assert total <= N
    rec(0, set(), 1.0, 0.0)
    return H / Z


def ref_che(p, M, iters=200):
    lo, hi = 0.0, 1.0
    f = lambda t: sum(1 - math.exp(-q * t) for q in p)
    while f(hi) < M:
        hi *= 2
    for _ in range(iters):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if f(mid) < M else (lo, mid)
    T = (lo + hi) / 2
    return sum(q * (1 - math.exp(-q * T)) for q in p), T


def ref_fill_time_root(p, M, iters=200):
    lo, hi = 0.0, 1.0
    f = lambda t: sum(1 - (1 - q) ** t for q in p)
    while f(hi) < M:
        hi *= 2
    for _ in range(iters):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if f(mid) < M else (lo, mid)
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# TTL


def ref_ttl_codes(times, objs, discipline, dt, offset=0.0):
    """Pure TTL cache: a request hits iff the object holds a valid copy."""
    expiry, out = {}, []
    for t, k in zip(times, objs):
        hit = k in expiry and t < expiry[k]
        if discipline == "RESET_PER_MISS":
            if not hit:
                expiry[k] = t + dt
        elif discipline == "RESET_PER_REQUEST":
            expiry[k] = t + dt
        elif discipline == "PERIODIC":
            if not hit:
                expiry[k] = offset + (math.floor((t - offset) / dt) + 1) * dt
        out.append(HIT if hit else UPLOAD)
    return out
