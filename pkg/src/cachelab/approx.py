"""Closed-form hit-ratio approximations and LRU cache-filling statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, ResourceLimit
from .markov.product_form import check_pmf


@dataclass(frozen=True)
class Approximation:
    per_object: np.ndarray
    hit_ratio: float
    root: float  # characteristic time, mean fill time or FIFO sojourn, per method


def _solve_increasing(f, target, name):
    """Root of ``f(x) = target`` for increasing ``f`` with ``f(0) = 0``."""
    hi = 1.0
    while f(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise InvalidArgument(f"{name}: no root found")
    x = brentq(lambda t: f(t) - target, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return x


def _prepare(pmf, M):
    p = check_pmf(pmf)
    if np.ndim(M) != 0 or M != int(M):
        raise InvalidArgument("M must be an integer")
    M = int(M)
    N = len(p)
    if not (1 <= M <= N):
        raise InvalidArgument(f"need 1 <= M <= N, got M={M}, N={N}")
    return p, M, N


def che_lru(pmf, M: int) -> Approximation:
    """LRU hit ratio via the characteristic time ``T`` with
    ``M = sum_j (1 - exp(-p_j T))`` (all objects in the sum)."""
    p, M, N = _prepare(pmf, M)
    if M >= np.count_nonzero(p):
        return Approximation((p > 0).astype(float), 1.0, math.inf)
    T = _solve_increasing(lambda t: -np.expm1(-p * t).sum(), M, "che_lru")
    h = -np.expm1(-p * T)
    return Approximation(h, float(p @ h), T)


def fagin_lru(pmf, M: int) -> Approximation:
    """LRU hit ratio from the expected working-set size.

    ``CT`` solves ``M = sum_k (1 - (1 - p_k) ** CT)`` with a real exponent and
    ``h_k = 1 - (1 - p_k) ** CT``.  Exact for ``M = 1``.
    """
    p, M, N = _prepare(pmf, M)
    if M >= np.count_nonzero(p):
        return Approximation((p > 0).astype(float), 1.0, math.inf)
    lg = np.log1p(-np.minimum(p, 1.0))  # -inf where p == 1

    def ws(ct):
        return -np.expm1(ct * lg).sum()

    ct = _solve_increasing(ws, M, "fagin_lru")
    h = -np.expm1(ct * lg)
    return Approximation(h, float(p @ h), ct)


def fifo_approx(pmf, M: int) -> Approximation:
    """FIFO / RANDOM hit ratio from the mean sojourn time ``D`` in requests,
    ``M = sum_j p_j D / (p_j D + 1)``."""
    p, M, N = _prepare(pmf, M)
    if M >= np.count_nonzero(p):
        return Approximation((p > 0).astype(float), 1.0, math.inf)
    D = _solve_increasing(lambda d: (p * d / (p * d + 1.0)).sum(), M, "fifo_approx")
    h = p * D / (p * D + 1.0)
    return Approximation(h, float(p @ h), D)


def filling_phase_hit_bound(pmf, r):
    """Hit probability at request ``r + 1`` of an initially empty cache that
    keeps everything: ``sum_k p_k (1 - (1 - p_k) ** r)``.  ``r`` may be an array."""
    p = check_pmf(pmf)
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any(r_arr < 0):
        raise InvalidArgument("r must be >= 0")
    lg = np.log1p(-np.minimum(p, 1.0))
    out = p @ -np.expm1(np.multiply.outer(lg, r_arr.ravel()))
    return out.reshape(r_arr.shape) if r_arr.ndim else float(out[0])


@dataclass(frozen=True)
class FillTimeDistribution:
    r: np.ndarray  # support M..r_max
    prob: np.ndarray  # Prob{CT = r}
    mean: float  # exact mean (not truncated)
    tail: float  # Prob{CT > r_max}


def convergence_time_distribution(pmf, M: int, r_max: int, max_objects: int = 10,
                                  max_m: int = 5) -> FillTimeDistribution:
    """Distribution of the number of requests until ``M`` distinct objects
    have been referenced, starting from an empty cache.

    The chain runs over the set of objects seen so far (order is irrelevant
    for the count), restricted to sets with fewer than ``M`` members.
    """
    p, M, N = _prepare(pmf, M)
    if N > max_objects or M > max_m:
        raise ResourceLimit(
            f"N={N}, M={M} exceed the enumeration guard (N <= {max_objects}, M <= {max_m}); "
            "use fagin_lru for the mean")
    if r_max < M:
        raise InvalidArgument("r_max must be >= M")
    masks = [m for m in range(1 << N) if bin(m).count("1") < M]
    pos = {m: i for i, m in enumerate(masks)}
    n = len(masks)
    T = np.zeros((n, n))
    absorb = np.zeros(n)
    for m in masks:
        i = pos[m]
        for k in range(N):
            if m >> k & 1:
                T[i, i] += p[k]
            else:
                j = pos.get(m | 1 << k)
                if j is None:
                    absorb[i] += p[k]
                else:
                    T[i, j] += p[k]
    x = np.zeros(n)
    x[pos[0]] = 1.0
    prob = np.zeros(r_max + 1)
    for r in range(1, r_max + 1):
        prob[r] = x @ absorb
        x = x @ T
    tail = float(x.sum())
    visits = np.linalg.solve((np.eye(n) - T).T, np.eye(n)[pos[0]])
    mean = float(visits.sum())
    return FillTimeDistribution(np.arange(M, r_max + 1), prob[M:], mean, tail)


def simulate_fill_times(pmf, M: int, reps: int, seed: int) -> np.ndarray:
    """Monte Carlo fill times: requests until ``M`` distinct objects were seen."""
    p, M, N = _prepare(pmf, M)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    ct = fagin_lru(p, M).root if M < N else float(M)
    chunk = int(max(2 * M, 2 * ct if math.isfinite(ct) else 4 * M)) + 16
    out = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        seen = np.zeros(0, dtype=np.int64)
        while True:
            draw = np.searchsorted(cdf, rng.random(chunk), side="right")
            seen = np.concatenate([seen, draw])
            uniq, idx = np.unique(seen, return_index=True)
            if len(uniq) >= M:
                out[i] = np.sort(idx)[M - 1] + 1
                break
    return out
