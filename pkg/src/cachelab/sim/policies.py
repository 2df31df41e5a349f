"""Replacement and admission policies for the trace-driven simulator.

Every policy object exposes ``access(k) -> code`` for catalog index ``k``
where code is :data:`MISS` (miss without upload), :data:`HIT` or
:data:`UPLOAD` (miss that loads the object), plus ``contains(k)`` and the
current occupancy ``used`` in bytes.  Objects larger than the capacity are
bypassed: they are never admitted and always miss without upload.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import InvalidArgument, UnsupportedPolicy

MISS, HIT, UPLOAD = 0, 1, 2


class Kind(str, Enum):
    LRU = "LRU"
    FIFO = "FIFO"
    CLOCK_PER_REQUEST = "CLOCK_PER_REQUEST"
    RANDOM = "RANDOM"
    LFU = "LFU"
    WINDOW_LFU = "WINDOW_LFU"
    SCORE_GATED_CLOCK = "SCORE_GATED_CLOCK"
    GREEDY_DUAL = "GREEDY_DUAL"
    MULTI_LEVEL = "MULTI_LEVEL"
    PROB_ADMIT = "PROB_ADMIT"


_ALIASES = {
    "CPR": Kind.CLOCK_PER_REQUEST,
    "CLOCK": Kind.CLOCK_PER_REQUEST,
    "SGC": Kind.SCORE_GATED_CLOCK,
    "GD": Kind.GREEDY_DUAL,
    "GDSF": Kind.GREEDY_DUAL,
    "WLFU": Kind.WINDOW_LFU,
}


def parse_kind(name) -> Kind:
    if isinstance(name, Kind):
        return name
    key = str(name).strip().upper().replace("-", "_")
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Kind(key)
    except ValueError:
        raise InvalidArgument(f"unknown policy kind {name!r}") from None


@dataclass(frozen=True)
class ScoreSpec:
    """Product of selected factors: request count, value, inverse size."""

    count: bool = True
    value: bool = False
    inv_size: bool = False

    @classmethod
    def parse(cls, text: str) -> "ScoreSpec":
        """Parse ``"c"``, ``"c/s"``, ``"c*v/s"``, ``"v/s"`` and the like."""
        t = text.replace(" ", "").lower()
        num, _, den = t.partition("/")
        factors = [f for f in num.split("*") if f and f != "1"]
        if den not in ("", "s") or not set(factors) <= {"c", "v"}:
            raise InvalidArgument(f"cannot parse score {text!r}")
        return cls("c" in factors, "v" in factors, den == "s")

    def __str__(self):
        num = "*".join(f for f, on in (("c", self.count), ("v", self.value)) if on) or "1"
        return num + ("/s" if self.inv_size else "")

    def static_factor(self, size, value) -> float:
        f = 1.0
        if self.value:
            f *= value
        if self.inv_size:
            f /= size
        if not (f >= 0 and math.isfinite(f)):
            raise InvalidArgument(f"score factor must be finite and >= 0, got {f}")
        return f


@dataclass(frozen=True)
class PolicyConfig:
    """Declarative description of one caching strategy.

    ``levels`` (MULTI_LEVEL) lists ``(slots, kind)`` from the top level down;
    new objects enter the last level.  ``admit`` (PROB_ADMIT) is either a
    per-object probability array or a float ``beta`` selecting
    ``q_k = exp(-beta * s_k / v_k)``.
    """

    kind: Kind
    seed: int = 0
    window: int | None = None
    score: ScoreSpec | None = None
    levels: tuple = ()
    inner: Kind | None = None
    admit: object = None
    tie_break: str = "oldest"

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        k = self.kind
        if k is Kind.WINDOW_LFU and (self.window is None or self.window < 1):
            raise InvalidArgument("WINDOW_LFU needs window >= 1")
        if k is Kind.MULTI_LEVEL:
            if not self.levels:
                raise InvalidArgument("MULTI_LEVEL needs levels")
            lv = tuple((int(l), parse_kind(kk)) for l, kk in self.levels)
            for l, kk in lv:
                if l < 1:
                    raise InvalidArgument("level sizes must be >= 1")
                if kk not in (Kind.FIFO, Kind.RANDOM, Kind.CLOCK_PER_REQUEST):
                    raise InvalidArgument(f"level kind {kk.value} not supported")
            object.__setattr__(self, "levels", lv)
        if k is Kind.PROB_ADMIT:
            if self.inner is None or self.admit is None:
                raise InvalidArgument("PROB_ADMIT needs inner kind and admit rule")
            object.__setattr__(self, "inner", parse_kind(self.inner))
        if self.tie_break not in ("oldest", "newest"):
            raise InvalidArgument("tie_break must be 'oldest' or 'newest'")
        if isinstance(self.score, str):
            object.__setattr__(self, "score", ScoreSpec.parse(self.score))

    @property
    def name(self) -> str:
        k = self.kind
        if k is Kind.WINDOW_LFU:
            return f"WINDOW_LFU(W={self.window})"
        if k in (Kind.SCORE_GATED_CLOCK, Kind.GREEDY_DUAL) or (k is Kind.LFU and self.score):
            return f"{k.value}({self.score or _default_score(k)})"
        if k is Kind.MULTI_LEVEL:
            return "MULTI_LEVEL(" + ",".join(f"{l}:{kk.value}" for l, kk in self.levels) + ")"
        if k is Kind.PROB_ADMIT:
            return f"PROB_ADMIT({self.inner.value})"
        return k.value


def _default_score(kind):
    if kind in (Kind.SCORE_GATED_CLOCK, Kind.GREEDY_DUAL):
        return ScoreSpec(count=True, value=True, inv_size=True)
    return ScoreSpec()


class _Policy:
    used = 0

    def __init__(self, capacity, sizes, values, cfg):
        self.cap = int(capacity)
        self.s = sizes
        self.v = values
        self.cfg = cfg

    def contents(self):
        raise NotImplementedError

    def check(self):
        c = list(self.contents())
        assert len(set(c)) == len(c), "duplicate resident"
        assert self.used == sum(self.s[k] for k in c), "occupancy bookkeeping drift"
        assert self.used <= self.cap, "capacity exceeded"


class LRU(_Policy):
    def __init__(self, *a):
        super().__init__(*a)
        self.cache = OrderedDict()

    def contains(self, k):
        return k in self.cache

    def contents(self):
        return self.cache.keys()

    def access(self, k):
        c = self.cache
        if k in c:
            c.move_to_end(k)
            return HIT
        s = self.s[k]
        if s > self.cap:
            return MISS
        used = self.used + s
        if used > self.cap:
            sz = self.s
            pop = c.popitem
            while used > self.cap:
                used -= sz[pop(last=False)[0]]
        c[k] = None
        self.used = used
        return UPLOAD

    def touch(self, k):
        self.cache.move_to_end(k)


class FIFO(LRU):
    def access(self, k):
        c = self.cache
        if k in c:
            return HIT
        s = self.s[k]
        if s > self.cap:
            return MISS
        used = self.used + s
        if used > self.cap:
            sz = self.s
            pop = c.popitem
            while used > self.cap:
                used -= sz[pop(last=False)[0]]
        c[k] = None
        self.used = used
        return UPLOAD

    def touch(self, k):
        pass


class ClockPerRequest(_Policy):
    """Ring of residents with the hand at ``ring[0]``.

    The hand steps once per request.  On a miss the objects at the hand are
    evicted until the new object fits; the new object takes the freed
    position and the hand moves past it (it becomes ``ring[-1]``).
    """

    def __init__(self, *a):
        super().__init__(*a)
        self.ring = deque()
        self.members = set()

    def contains(self, k):
        return k in self.members

    def contents(self):
        return list(self.ring)

    def access(self, k):
        ring = self.ring
        if k in self.members:
            ring.rotate(-1)
            return HIT
        s = self.s[k]
        if s > self.cap:
            ring.rotate(-1)
            return MISS
        used = self.used + s
        if used > self.cap:
            sz = self.s
            members = self.members
            while used > self.cap:
                old = ring.popleft()
                members.discard(old)
                used -= sz[old]
        ring.append(k)
        self.members.add(k)
        self.used = used
        return UPLOAD

    def touch(self, k):
        self.ring.rotate(-1)


class Random(_Policy):
    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        self.arr = []
        self.pos = {}
        self.rand = random.Random(cfg.seed).random

    def contains(self, k):
        return k in self.pos

    def contents(self):
        return list(self.arr)

    def access(self, k):
        pos = self.pos
        if k in pos:
            return HIT
        s = self.s[k]
        if s > self.cap:
            return MISS
        used = self.used + s
        arr = self.arr
        while used > self.cap:
            i = int(self.rand() * len(arr))
            victim = arr[i]
            last = arr.pop()
            if last != victim:
                arr[i] = last
                pos[last] = i
            del pos[victim]
            used -= self.s[victim]
        pos[k] = len(arr)
        arr.append(k)
        self.used = used
        return UPLOAD

    def touch(self, k):
        pass


class _ScoreHeap:
    """Min-heap of residents keyed by ``(score, tie)`` with lazy deletion."""

    def __init__(self):
        self.heap = []
        self.key = {}

    def __contains__(self, k):
        return k in self.key

    def __len__(self):
        return len(self.key)

    def set(self, k, score, tie):
        key = (score, tie)
        self.key[k] = key
        heapq.heappush(self.heap, (score, tie, k))
        if len(self.heap) > 4 * len(self.key) + 1024:
            self.heap = [(sc, t, kk) for kk, (sc, t) in self.key.items()]
            heapq.heapify(self.heap)

    def remove(self, k):
        del self.key[k]

    def pop_min(self):
        heap, key = self.heap, self.key
        while True:
            score, tie, k = heapq.heappop(heap)
            if key.get(k) == (score, tie):
                del key[k]
                return k, score, tie

    def keys(self):
        return self.key.keys()


class LFU(_Policy):
    """Count-based admission and eviction (perfect LFU or sliding window).

    On a miss the lowest-scored residents are set aside until the new object
    fits; the object is admitted only if its score strictly exceeds every one
    of them, otherwise they are kept and nothing is uploaded.  Equal scores
    evict the longest-resident object first (``tie_break='oldest'``) or the
    object that reached its score most recently (``'newest'``).
    """

    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        self.count = {}
        self.res = _ScoreHeap()
        spec = cfg.score or ScoreSpec()
        if not spec.count:
            raise InvalidArgument("LFU score must include the request count")
        self.factor = [spec.static_factor(s, v) for s, v in zip(sizes, values)]
        self.newest = cfg.tie_break == "newest"
        self.clock = 0
        self.window = cfg.window if cfg.kind is Kind.WINDOW_LFU else None
        if self.window:
            self.recent = deque()

    def contains(self, k):
        return k in self.res

    def contents(self):
        return list(self.res.keys())

    def _tie(self, k):
        return -self.clock if self.newest else self.admitted[k]

    def _bump(self, k, delta):
        c = self.count.get(k, 0) + delta
        if c:
            self.count[k] = c
        else:
            self.count.pop(k, None)
        return c

    def access(self, k):
        self.clock += 1
        res = self.res
        if self.window:
            self.recent.append(k)
            if len(self.recent) > self.window:
                old = self.recent.popleft()
                c_old = self._bump(old, -1)
                if old != k and old in res:
                    res.set(old, c_old * self.factor[old], self._tie_of(old))
        c = self._bump(k, 1)
        score = c * self.factor[k]
        if k in res:
            res.set(k, score, -self.clock if self.newest else res.key[k][1])
            return HIT
        s = self.s[k]
        if s > self.cap:
            return MISS
        used = self.used + s
        taken = []
        while used > self.cap:
            victim, vs, vt = res.pop_min()
            taken.append((victim, vs, vt))
            used -= self.s[victim]
            if vs >= score:
                break
        if used > self.cap or (taken and taken[-1][1] >= score):
            for victim, vs, vt in taken:
                res.set(victim, vs, vt)
            return MISS
        res.set(k, score, -self.clock if self.newest else self.clock)
        self.used = used
        return UPLOAD

    def _tie_of(self, k):
        # aging in the window does not count as "reaching" a new score
        return self.res.key[k][1]


class ScoreGatedClock(ClockPerRequest):
    """Clock-per-request eviction with score-gated admission."""

    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        spec = cfg.score or _default_score(Kind.SCORE_GATED_CLOCK)
        self.spec = spec
        self.factor = [spec.static_factor(s, v) for s, v in zip(sizes, values)]
        self.count = [0] * len(sizes) if spec.count else None

    def _score(self, k):
        if self.count is None:
            return self.factor[k]
        return self.count[k] * self.factor[k]

    def access(self, k):
        if self.count is not None:
            self.count[k] += 1
        ring = self.ring
        if k in self.members:
            ring.rotate(-1)
            return HIT
        s = self.s[k]
        if s > self.cap:
            ring.rotate(-1)
            return MISS
        used = self.used + s
        if used > self.cap:
            score = self._score(k)
            need = used - self.cap
            freed = 0
            n = 0
            for cand in ring:
                if self._score(cand) >= score:
                    ring.rotate(-1)
                    return MISS
                freed += self.s[cand]
                n += 1
                if freed >= need:
                    break
            for _ in range(n):
                self.members.discard(ring.popleft())
            used -= freed
        ring.append(k)
        self.members.add(k)
        self.used = used
        return UPLOAD


class GreedyDual(_Policy):
    """GreedyDual-Size-Frequency: priority ``H = L + score``, inflation ``L``."""

    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        spec = cfg.score or _default_score(Kind.GREEDY_DUAL)
        self.factor = [spec.static_factor(s, v) for s, v in zip(sizes, values)]
        self.count = [0] * len(sizes) if spec.count else None
        self.res = _ScoreHeap()
        self.L = 0.0
        self.seq = 0

    def contains(self, k):
        return k in self.res

    def contents(self):
        return list(self.res.keys())

    def access(self, k):
        if self.count is not None:
            self.count[k] += 1
            score = self.count[k] * self.factor[k]
        else:
            score = self.factor[k]
        self.seq += 1
        res = self.res
        if k in res:
            res.set(k, self.L + score, self.seq)
            return HIT
        s = self.s[k]
        if s > self.cap:
            return MISS
        used = self.used + s
        while used > self.cap:
            victim, h, _ = res.pop_min()
            if h > self.L:
                self.L = h
            used -= self.s[victim]
        res.set(k, self.L + score, self.seq)
        self.used = used
        return UPLOAD


class MultiLevel(_Policy):
    """Unit-size cache split into levels ``1..K`` (level 1 on top).

    A miss enters the lowest level with room, or replaces the eviction
    candidate of level K.  A hit at level ``j >= 2`` exchanges the object with
    the eviction candidate of level ``j-1``: the two swap slots.  A hit at
    level 1 changes nothing but the clock.  Every clock-per-request level steps
    its hand once per request; FIFO hands step only after a replacement.
    """

    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        if any(sizes[k] != 1 for k in range(len(sizes))):
            raise UnsupportedPolicy("MULTI_LEVEL requires unit object sizes")
        total = sum(l for l, _ in cfg.levels)
        if total != self.cap:
            raise InvalidArgument(f"capacity {self.cap} != sum of level sizes {total}")
        self.kinds = [kk for _, kk in cfg.levels]
        self.slots = [[None] * l for l, _ in cfg.levels]
        self.hand = [0] * len(cfg.levels)
        self.where = {}  # k -> (level, slot)
        self.rand = random.Random(cfg.seed).random
        self.clocks = [j for j, kk in enumerate(self.kinds) if kk is Kind.CLOCK_PER_REQUEST]

    def contains(self, k):
        return k in self.where

    def contents(self):
        return list(self.where)

    def _candidate(self, j):
        if self.kinds[j] is Kind.RANDOM:
            return int(self.rand() * len(self.slots[j]))
        return self.hand[j]

    def _after_replace(self, j, i):
        if self.kinds[j] is Kind.FIFO:
            self.hand[j] = (i + 1) % len(self.slots[j])

    def _step_clocks(self):
        for j in self.clocks:
            self.hand[j] = (self.hand[j] + 1) % len(self.slots[j])

    def access(self, k):
        where, slots = self.where, self.slots
        loc = where.get(k)
        if loc is not None:
            j, i = loc
            if j > 0:
                up = j - 1
                free = self._free_slot(up)
                if free is not None:
                    slots[j][i] = None
                    slots[up][free] = k
                    where[k] = (up, free)
                else:
                    c = self._candidate(up)
                    y = slots[up][c]
                    slots[up][c], slots[j][i] = k, y
                    where[k], where[y] = (up, c), (j, i)
                    self._after_replace(up, c)
            self._step_clocks()
            return HIT
        for j in range(len(slots) - 1, -1, -1):
            free = self._free_slot(j)
            if free is not None:
                slots[j][free] = k
                where[k] = (j, free)
                self.used += 1
                self._step_clocks()
                return UPLOAD
        j = len(slots) - 1
        c = self._candidate(j)
        del where[slots[j][c]]
        slots[j][c] = k
        where[k] = (j, c)
        self._after_replace(j, c)
        self._step_clocks()
        return UPLOAD

    def _free_slot(self, j):
        if len(self.where) >= self.cap:
            return None
        try:
            return self.slots[j].index(None)
        except ValueError:
            return None


class ProbAdmit(_Policy):
    """Each request is handled by the inner policy with probability ``q_k``;
    otherwise the cache is left untouched (a resident object still hits)."""

    def __init__(self, capacity, sizes, values, cfg):
        super().__init__(capacity, sizes, values, cfg)
        inner_cfg = PolicyConfig(cfg.inner, seed=cfg.seed, window=cfg.window, score=cfg.score,
                                 levels=cfg.levels, tie_break=cfg.tie_break)
        self.inner = build(inner_cfg, capacity, sizes, values)
        self.q = admit_probabilities(cfg.admit, sizes, values)
        self.rand = random.Random((cfg.seed * 0x9E3779B97F4A7C15 + 1) % 2**64).random

    @property
    def used(self):
        return self.inner.used

    def contains(self, k):
        return self.inner.contains(k)

    def contents(self):
        return self.inner.contents()

    def access(self, k):
        q = self.q[k]
        if q < 1.0 and self.rand() >= q:
            return HIT if self.inner.contains(k) else MISS
        return self.inner.access(k)


def admit_probabilities(admit, sizes, values) -> list[float]:
    if isinstance(admit, (int, float)) and not isinstance(admit, bool):
        beta = float(admit)
        if beta < 0:
            raise InvalidArgument("admission beta must be >= 0")
        q = [math.exp(-beta * s / v) if v > 0 else 0.0 for s, v in zip(sizes, values)]
    else:
        q = [float(x) for x in np.asarray(admit, dtype=np.float64)]
        if len(q) != len(sizes):
            raise InvalidArgument("admit probability vector length != catalog size")
    if any(not (0 < x <= 1) for x in q):
        raise InvalidArgument("admission probabilities must lie in (0, 1]")
    return q


_CLASSES = {
    Kind.LRU: LRU,
    Kind.FIFO: FIFO,
    Kind.CLOCK_PER_REQUEST: ClockPerRequest,
    Kind.RANDOM: Random,
    Kind.LFU: LFU,
    Kind.WINDOW_LFU: LFU,
    Kind.SCORE_GATED_CLOCK: ScoreGatedClock,
    Kind.GREEDY_DUAL: GreedyDual,
    Kind.MULTI_LEVEL: MultiLevel,
    Kind.PROB_ADMIT: ProbAdmit,
}


def build(cfg: PolicyConfig, capacity, sizes, values):
    """Instantiate the policy state for a cache of ``capacity`` bytes.

    ``sizes`` and ``values`` are per-catalog-index sequences.
    """
    if capacity < 0:
        raise InvalidArgument("capacity must be >= 0")
    sizes = [int(x) for x in sizes]
    values = [float(x) for x in values]
    return _CLASSES[cfg.kind](int(capacity), sizes, values, cfg)
