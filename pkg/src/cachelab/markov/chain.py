"""Explicit Markov chains over cache states (small-instance oracle).

The state space is explored from the empty cache.  Each request ``k`` moves
the chain according to the same step rules as the simulator, with random
evictions expanded into their outcome probabilities.  The reported
distribution is the long-run behaviour from the empty cache: transient
states get zero mass, and when several closed classes exist each one is
weighted by the probability of being absorbed into it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from ..errors import InvalidArgument, ResourceLimit
from ..sim.policies import Kind, parse_kind
from .product_form import check_pmf


@dataclass(frozen=True)
class ChainSpec:
    """Instance for :func:`brute_force_chain`.

    ``policy`` is LRU, FIFO, CLOCK_PER_REQUEST (alias CPR), RANDOM or
    MULTI_LEVEL; ``levels`` gives ``(slots, kind)`` per level, top first, for
    MULTI_LEVEL (all slots ``1`` is the CLIMB policy).  ``admit`` holds
    optional per-object treatment probabilities ``q_k``.
    """

    policy: object
    pmf: tuple
    capacity: int
    sizes: tuple | None = None
    values: tuple | None = None
    admit: tuple | None = None
    levels: tuple = ()
    max_states: int = 10**6

    def __post_init__(self):
        object.__setattr__(self, "policy", parse_kind(self.policy))
        if self.policy not in (Kind.LRU, Kind.FIFO, Kind.CLOCK_PER_REQUEST, Kind.RANDOM,
                               Kind.MULTI_LEVEL):
            raise InvalidArgument(f"no chain model for {self.policy.value}")


@dataclass
class ChainResult:
    states: list
    pi: np.ndarray
    ohr: float
    bhr: float
    vhr: float
    residual: float
    transient: int = 0

    def distribution(self) -> dict:
        return dict(zip(self.states, self.pi.tolist()))


class _Steps:
    """Successor generator: ``succ(state, k) -> [(prob, next_state)]``."""

    def __init__(self, spec: ChainSpec, sizes):
        self.kind = spec.policy
        self.cap = spec.capacity
        self.s = sizes
        if self.kind is Kind.MULTI_LEVEL:
            lv = [(int(l), parse_kind(kk)) for l, kk in spec.levels]
            if sum(l for l, _ in lv) != self.cap:
                raise InvalidArgument("capacity must equal the sum of level sizes")
            if any(x != 1 for x in sizes):
                raise InvalidArgument("MULTI_LEVEL chains require unit sizes")
            self.levels = lv

    def initial(self):
        if self.kind is Kind.RANDOM:
            return frozenset()
        if self.kind is Kind.MULTI_LEVEL:
            return (tuple((None,) * l for l, _ in self.levels), (0,) * len(self.levels))
        return ()

    def resident(self, state):
        if self.kind is Kind.MULTI_LEVEL:
            return [k for lvl in state[0] for k in lvl if k is not None]
        return list(state)

    def used(self, objs):
        return sum(self.s[k] for k in objs)

    def succ(self, state, k):
        kind, s, cap = self.kind, self.s, self.cap
        if kind is Kind.MULTI_LEVEL:
            return self._succ_ml(state, k)
        hit = k in state
        if kind is Kind.LRU:
            if hit:
                return [(1.0, (k,) + tuple(x for x in state if x != k))]
            if s[k] > cap:
                return [(1.0, state)]
            st = list(state)
            while self.used(st) + s[k] > cap:
                st.pop()
            return [(1.0, (k,) + tuple(st))]
        if kind is Kind.FIFO:
            if hit or s[k] > cap:
                return [(1.0, state)]
            st = list(state)
            while self.used(st) + s[k] > cap:
                st.pop()
            return [(1.0, (k,) + tuple(st))]
        if kind is Kind.CLOCK_PER_REQUEST:
            # tuple starts at the hand
            if hit or s[k] > cap:
                return [(1.0, state[1:] + state[:1])]
            st = list(state)
            while self.used(st) + s[k] > cap:
                st.pop(0)
            return [(1.0, tuple(st) + (k,))]
        # RANDOM: expand every eviction sequence
        if hit or s[k] > cap:
            return [(1.0, state)]
        out = {}
        stack = [(1.0, state)]
        while stack:
            pr, st = stack.pop()
            if self.used(st) + s[k] <= cap:
                nxt = st | {k}
                out[nxt] = out.get(nxt, 0.0) + pr
                continue
            for x in st:
                stack.append((pr / len(st), st - {x}))
        return [(pr, st) for st, pr in out.items()]

    def _succ_ml(self, state, k):
        slots, hands = state
        K = len(slots)
        kinds = [kk for _, kk in self.levels]

        def step_clocks(h):
            return tuple((h[j] + 1) % len(slots[j]) if kinds[j] is Kind.CLOCK_PER_REQUEST else h[j]
                         for j in range(K))

        def candidates(j):
            if kinds[j] is Kind.RANDOM:
                n = len(slots[j])
                return [(1.0 / n, i) for i in range(n)]
            return [(1.0, hands[j])]

        def replace(sl, h, j, i, obj):
            sl = [list(x) for x in sl]
            sl[j][i] = obj
            h = list(h)
            if kinds[j] is Kind.FIFO:
                h[j] = (i + 1) % len(sl[j])
            return sl, h

        loc = None
        for j in range(K):
            if k in slots[j]:
                loc = (j, slots[j].index(k))
        n_res = sum(x is not None for lvl in slots for x in lvl)
        out = []
        if loc is not None:
            j, i = loc
            if j == 0:
                return [(1.0, (slots, step_clocks(hands)))]
            up = j - 1
            if n_res < self.cap and None in slots[up]:
                f = slots[up].index(None)
                sl = [list(x) for x in slots]
                sl[j][i] = None
                sl[up][f] = k
                return [(1.0, (tuple(map(tuple, sl)), step_clocks(hands)))]
            for pr, c in candidates(up):
                y = slots[up][c]
                sl, h = replace(slots, hands, up, c, k)
                sl[j][i] = y
                out.append((pr, (tuple(map(tuple, sl)), step_clocks(tuple(h)))))
            return out
        if n_res < self.cap:
            for j in range(K - 1, -1, -1):
                if None in slots[j]:
                    sl = [list(x) for x in slots]
                    sl[j][slots[j].index(None)] = k
                    return [(1.0, (tuple(map(tuple, sl)), step_clocks(hands)))]
        j = K - 1
        for pr, c in candidates(j):
            sl, h = replace(slots, hands, j, c, k)
            out.append((pr, (tuple(map(tuple, sl)), step_clocks(tuple(h)))))
        return out


def brute_force_chain(spec: ChainSpec) -> ChainResult:
    """Stationary distribution and OHR/BHR/VHR of the explicit cache chain."""
    p = check_pmf(spec.pmf)
    N = len(p)
    sizes = [1] * N if spec.sizes is None else [int(x) for x in spec.sizes]
    values = np.ones(N) if spec.values is None else np.asarray(spec.values, dtype=np.float64)
    q = np.ones(N) if spec.admit is None else np.asarray(spec.admit, dtype=np.float64)
    if len(sizes) != N or len(values) != N or len(q) != N:
        raise InvalidArgument("pmf, sizes, values and admit must have equal length")
    if np.any(q <= 0) or np.any(q > 1):
        raise InvalidArgument("admission probabilities must lie in (0, 1]")
    steps = _Steps(spec, sizes)

    start = steps.initial()
    index = {start: 0}
    states = [start]
    rows, cols, vals = [], [], []
    queue = deque([start])
    while queue:
        st = queue.popleft()
        i = index[st]
        for k in range(N):
            if p[k] == 0:
                continue
            moves = [(pr * q[k], nx) for pr, nx in steps.succ(st, k)]
            if q[k] < 1:
                moves.append((1.0 - q[k], st))
            for pr, nx in moves:
                j = index.get(nx)
                if j is None:
                    j = index[nx] = len(states)
                    states.append(nx)
                    queue.append(nx)
                    if len(states) > spec.max_states:
                        raise ResourceLimit(f"more than {spec.max_states} reachable states")
                rows.append(i)
                cols.append(j)
                vals.append(p[k] * pr)
    n = len(states)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    rowsum = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(rowsum - 1.0)) > 1e-12:
        raise AssertionError("transition rows do not sum to one")

    classes, _ = _closed_classes(P)
    pi = np.zeros(n)
    if len(classes) == 1:
        weights = [1.0]
    else:
        weights = _absorption(P, classes)
    for cls, a in zip(classes, weights):
        if a > 0:
            pi[cls] = a * _class_stationary(P, cls)
    m = sum(len(c) for c in classes)
    residual = float(np.max(np.abs(P.T @ pi - pi)))

    s_arr = np.asarray(sizes, dtype=np.float64)
    hit_w = np.zeros((n, 3))
    for i, st in enumerate(states):
        if pi[i] == 0:
            continue
        res = steps.resident(st)
        hit_w[i] = (p[res].sum(), (p[res] * s_arr[res]).sum(), (p[res] * values[res]).sum())
    num = pi @ hit_w
    den = (1.0, float(p @ s_arr), float(p @ values))
    return ChainResult(
        states=states,
        pi=pi,
        ohr=float(num[0] / den[0]),
        bhr=float(num[1] / den[1]),
        vhr=float(num[2] / den[2]) if den[2] != 0 else float("nan"),
        residual=residual,
        transient=int(n - m),
    )


def _closed_classes(P):
    """Closed strongly connected classes and the component label of every state."""
    ncomp, label = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaves = np.ones(ncomp, dtype=bool)
    cross = label[coo.row] != label[coo.col]
    leaves[np.unique(label[coo.row[cross]])] = False
    return [np.flatnonzero(label == c) for c in np.flatnonzero(leaves)], label


def _class_stationary(P, cls) -> np.ndarray:
    m = len(cls)
    if m == 1:
        return np.ones(1)
    sub = P[cls][:, cls].tocsc()
    A = (sub.T - sp.identity(m, format="csc")).tolil()
    A[0, :] = np.ones(m)
    b = np.zeros(m)
    b[0] = 1.0
    x = np.maximum(spsolve(A.tocsc(), b), 0.0)
    return x / x.sum()


def _absorption(P, classes) -> list:
    """Probability that the chain started in state 0 ends in each closed class.

    Several closed classes occur when the cache can lock in, e.g. FIFO once
    every object fits: each insertion order is then absorbing.
    """
    n = P.shape[0]
    closed = np.zeros(n, dtype=bool)
    for c in classes:
        closed[c] = True
    if closed[0]:
        return [1.0 if 0 in c else 0.0 for c in classes]
    T = np.flatnonzero(~closed)
    pos = np.full(n, -1)
    pos[T] = np.arange(len(T))
    Q = P[T][:, T].tocsc()
    A = (sp.identity(len(T), format="csc") - Q).T.tocsc()
    e0 = np.zeros(len(T))
    e0[pos[0]] = 1.0
    # expected visits to every transient state before absorption
    visits = spsolve(A, e0) if len(T) > 1 else e0 / A.toarray()[0, 0]
    PT = P[T]
    return [float(visits @ np.asarray(PT[:, c].sum(axis=1)).ravel()) for c in classes]
