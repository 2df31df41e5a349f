"""Product-form steady state of unit-size FIFO / RANDOM / clock caches.

Under IRM the cache content ``S`` (|S| = M) of all three policies has
stationary probability proportional to ``prod_{k in S} p_k``.  The hit ratio
is therefore a ratio of two sums over M-subsets which we accumulate with an
elementary-symmetric recursion, one object at a time:

    E_j  <-  E_j + g_k E_{j-1}
    F_j  <-  F_j + g_k (F_{j-1} + w_k E_{j-1})

where ``g`` are the content weights and ``w`` the hit weights.  ``F_M / E_M``
is the hit ratio.  Each row is rescaled to keep the values in range.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument, ResourceLimit


def check_pmf(pmf, name="pmf") -> np.ndarray:
    p = np.asarray(pmf, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise InvalidArgument(f"{name} must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidArgument(f"{name} entries must be finite and >= 0")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidArgument(f"{name} must sum to 1 (got {p.sum():.12g})")
    return p


def _subset_sums(g: np.ndarray, w: np.ndarray, M: int) -> tuple[float, float]:
    """Return (E_M, F_M) up to a common scale factor."""
    N = len(g)
    E = np.ones(N + 1)  # E_0 over prefixes 0..N
    F = np.zeros(N + 1)
    for _ in range(M):
        # prefix k of the next row sums over objects 1..k
        E_new = np.empty(N + 1)
        F_new = np.empty(N + 1)
        E_new[0] = F_new[0] = 0.0
        np.cumsum(g * E[:-1], out=E_new[1:])
        np.cumsum(g * (F[:-1] + w * E[:-1]), out=F_new[1:])
        scale = E_new[-1]
        if not scale > 0:
            return 0.0, 0.0
        E, F = E_new / scale, F_new / scale
    return E[-1], F[-1]


def product_form_hit_ratio(pmf, M: int, weights=None) -> float:
    """Exact IRM hit ratio shared by FIFO, RANDOM and clock-per-request.

    ``weights`` (default ``pmf``) are the per-object hit weights; pass the
    original request probabilities here when ``pmf`` is a substituted
    content distribution (probabilistic admission).
    """
    p = check_pmf(pmf)
    N = len(p)
    if not (0 <= M <= N):
        raise InvalidArgument(f"need 0 <= M <= N, got M={M}, N={N}")
    if M == 0:
        return 0.0
    w = p if weights is None else np.asarray(weights, dtype=np.float64)
    if M == N:
        return float(w.sum())
    # objects with zero probability never enter the cache
    pos = p > 0
    if pos.sum() <= M:
        return float(w[pos].sum())
    E, F = _subset_sums(p[pos], w[pos], M)
    return float(F / E)


def probabilistic_substitution(pmf, admit) -> np.ndarray:
    """Content weights ``gamma_k = p_k q_k / sum_j p_j q_j``."""
    p = check_pmf(pmf)
    q = np.asarray(admit, dtype=np.float64)
    if q.shape != p.shape:
        raise InvalidArgument("admit vector length differs from pmf")
    if np.any(q <= 0) or np.any(q > 1):
        raise InvalidArgument("admission probabilities must lie in (0, 1]; drop objects with q = 0")
    g = p * q
    tot = g.sum()
    if not tot > 0:
        raise InvalidArgument("sum of p_k q_k must be positive")
    return g / tot


def multilevel_product_form(pmf, levels, weights=None, max_states: int = 10**7) -> float:
    """Hit ratio of a unit-size multi-level cache with FIFO/RANDOM/clock levels.

    ``levels = (l_1, ..., l_K)`` from the top level down.  The stationary
    probability of a placement is proportional to
    ``prod_j prod_{k in level j} p_k ** (K + 1 - j)``; the sum over
    placements is accumulated over a table indexed by the fill count of
    every level.
    """
    p = check_pmf(pmf)
    lv = [int(x) for x in levels]
    if not lv or any(x < 1 for x in lv):
        raise InvalidArgument("levels must be a non-empty list of sizes >= 1")
    N, K = len(p), len(lv)
    if sum(lv) > N:
        raise InvalidArgument(f"sum of level sizes {sum(lv)} exceeds N={N}")
    shape = tuple(x + 1 for x in lv)
    if N * K * int(np.prod(shape)) > max_states:
        raise ResourceLimit(f"multi-level table of {np.prod(shape)} cells x N={N} exceeds guard")
    w = p if weights is None else np.asarray(weights, dtype=np.float64)
    # scale content weights so that p * N is O(1); the common factor cancels
    scaled = p * N
    Z = np.zeros(shape)
    W = np.zeros(shape)
    Z[(0,) * K] = 1.0
    for k in range(N):
        if p[k] == 0:
            continue
        Zn, Wn = Z.copy(), W.copy()
        for j in range(K):
            g = scaled[k] ** (K - j)
            src = [slice(None)] * K
            dst = [slice(None)] * K
            src[j] = slice(0, lv[j])
            dst[j] = slice(1, lv[j] + 1)
            src, dst = tuple(src), tuple(dst)
            Zn[dst] += g * Z[src]
            Wn[dst] += g * (W[src] + w[k] * Z[src])
        m = Zn.max()
        Z, W = Zn / m, Wn / m
    full = tuple(lv)
    if Z[full] == 0:
        raise InvalidArgument("not enough objects with positive probability to fill all levels")
    return float(W[full] / Z[full])
