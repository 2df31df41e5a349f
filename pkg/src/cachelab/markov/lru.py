"""Exact IRM hit ratios of LRU, unit and variable object sizes.

The stationary LRU stack under IRM puts the ordered prefix
``(k_1, ..., k_j)`` on top with probability

    prod_i p_{k_i} / (1 - p_{k_1} - ... - p_{k_{i-1}}).

Summing over all orderings of a set ``S`` gives ``F(S)``, which satisfies
``F(S) = sum_{k in S} F(S - k) p_k / (1 - P(S - k))``.  An object ``n`` sits
directly below the set ``S`` with probability ``F(S) p_n / (1 - P(S))``; with
variable sizes it is cached iff ``size(S) + s_n <= M`` since LRU keeps the
longest stack prefix that fits.  Working over sets rather than ordered
tuples costs ``O(N 2^N)`` instead of ``O(N!)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument, ResourceLimit
from .product_form import check_pmf

MAX_OBJECTS = 20


@dataclass(frozen=True)
class LruExact:
    ohr: float
    bhr: float
    vhr: float


def _subset_table(x: np.ndarray) -> np.ndarray:
    """``out[mask] = sum of x[k] over the bits k of mask``."""
    out = np.zeros(1, dtype=np.float64)
    for xk in x:
        out = np.concatenate([out, out + xk])
    return out


def lru_exact_variable_size(pmf, sizes, M, values=None, weights=None,
                            max_objects: int = MAX_OBJECTS) -> LruExact:
    """Exact OHR, BHR and VHR of LRU with a cache of ``M`` bytes.

    Objects larger than ``M`` are never cached; they still take part in the
    request stream (as misses) and in the BHR/VHR denominators.  ``weights``
    (default ``pmf``) are the request probabilities used for the hit ratio when
    ``pmf`` is a substituted content distribution.
    """
    p = check_pmf(pmf)
    N = len(p)
    s = np.asarray(sizes, dtype=np.float64)
    v = np.ones(N) if values is None else np.asarray(values, dtype=np.float64)
    w = p if weights is None else np.asarray(weights, dtype=np.float64)
    if s.shape != p.shape or v.shape != p.shape or w.shape != p.shape:
        raise InvalidArgument("pmf, sizes, values and weights must have equal length")
    if np.any(s < 1):
        raise InvalidArgument("sizes must be >= 1")
    if M < 0:
        raise InvalidArgument("M must be >= 0")
    # objects that can never be cached behave like a permanent miss and do
    # not influence the stack prefix that fits; drop them from the content DP
    fit = (s <= M) & (p > 0)
    idx = np.flatnonzero(fit)
    n = len(idx)
    if n > max_objects:
        raise ResourceLimit(
            f"{n} cacheable objects exceed the exact LRU guard ({max_objects}); "
            "use che_lru or fagin_lru instead")
    den = (w.sum(), (w * s).sum(), (w * v).sum())
    if n == 0:
        return LruExact(0.0, 0.0, 0.0)
    # requests to non-cacheable objects leave the cacheable stack unchanged,
    # so the content follows LRU over the renormalised cacheable objects
    pc, sc = p[idx] / p[idx].sum(), s[idx]
    masks = np.arange(1 << n, dtype=np.int64)
    pop = _subset_table(np.ones(n)).astype(np.int64)
    P = _subset_table(pc)
    S = _subset_table(sc)
    F = np.zeros(1 << n)
    F[0] = 1.0
    live = S <= M
    for level in range(1, n + 1):
        cur = masks[(pop == level) & live]
        if len(cur) == 0:
            break
        acc = np.zeros(len(cur))
        for k in range(n):
            has = (cur >> k) & 1 == 1
            sub = cur[has] ^ (1 << k)
            rest = 1.0 - P[sub]
            acc[has] += F[sub] * pc[k] / np.where(rest > 0, rest, 1.0) * (rest > 0)
        F[cur] = acc
    hit = np.zeros(n)
    cand = masks[live]
    rest = 1.0 - P[cand]
    base = F[cand] / np.where(rest > 1e-300, rest, 1.0) * (rest > 1e-300)
    for k in range(n):
        ok = (((cand >> k) & 1) == 0) & (S[cand] + sc[k] <= M)
        hit[k] = pc[k] * base[ok].sum()
    wc, vc = w[idx], v[idx]
    ohr = float((wc * hit).sum() / den[0])
    bhr = float((wc * sc * hit).sum() / den[1])
    vhr = float((wc * vc * hit).sum() / den[2]) if den[2] != 0 else float("nan")
    return LruExact(ohr, bhr, vhr)


def lru_exact_hit_ratio(pmf, M: int, weights=None, max_objects: int = MAX_OBJECTS) -> float:
    """Exact unit-size LRU hit ratio for a cache of ``M`` objects."""
    p = check_pmf(pmf)
    if not (0 <= M <= len(p)):
        raise InvalidArgument(f"need 0 <= M <= N, got M={M}, N={len(p)}")
    if M == len(p):
        return float(p.sum() if weights is None else np.sum(weights))
    return lru_exact_variable_size(p, np.ones(len(p)), M, weights=weights,
                                   max_objects=max_objects).ohr
