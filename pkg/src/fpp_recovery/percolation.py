"""Exact law of the largest open cluster in site percolation on a
finite regular tree.

The high-recovery comparison needs the largest open cluster K in the
delta-ary tree of a given depth, with every vertex open independently
with probability p.  Depth 200 is far past anything a site-by-site
simulation can touch (the tree has delta^(depth+1) vertices), but the
law of K is computable exactly: condition on the root cluster size and
sweep over subtree heights.

    g_h[c] = P(every cluster in a height-h subtree has size <= k,
               and the cluster containing the subtree root has size c)

with c = 0 meaning a closed root.  A closed root at height h+1
contributes (1-p) * (sum g_h)^delta; an open root adds one to the
convolution of its delta children's root-cluster sizes, dropping any
mass that would exceed k.  P(K <= k) is the total mass left at the full
height.  Samples drawn by inverting this CDF carry exactly the
brute-force law, which the test suite verifies against literal site
percolation at small depth.
"""

from __future__ import annotations

import math

import numpy as np

from fpp_recovery.exact import DomainError, _check_count


def _cluster_sweep(delta: int, p: float, depth: int, k: int):
    """(cdf, sf) of P(largest open cluster <= k) on the delta-ary tree.

    The sweep carries two coupled quantities per level: the vector of
    root-cluster masses g[c] (all clusters done so far at most k, root
    cluster still open upward with size c), and the failure defect
    d = P(some cluster exceeds k).  The defect grows by a factor close
    to delta every level, so it must live in its own float scale;
    folding it into 1 - sum(g) would amplify rounding noise by the same
    factor per level and destroy every answer past depth ~50.  Both
    returned values are relatively accurate in their own regime: cdf as
    the positive mass sum when small, sf = d when small.
    """
    g = np.zeros(k + 1, dtype=np.float64)
    g[0] = 1.0 - p
    d = 0.0
    if k >= 1:
        g[1] = p
    else:
        d = p
    for _ in range(depth):
        conv = g
        for _ in range(delta - 1):
            conv = np.convolve(conv, g)
        dropped = float(conv[k:].sum())  # root cluster 1 + c > k
        if d >= 1.0:
            ok_power = 0.0
            d_next = 1.0
        else:
            ok_power = math.exp(delta * math.log1p(-d))  # (1-d)^delta
            d_next = -math.expm1(delta * math.log1p(-d)) + p * dropped
        ng = np.zeros(g.size, dtype=np.float64)
        ng[0] = (1.0 - p) * ok_power
        if k >= 1:
            ng[1:] = p * conv[:k]
        g = ng
        d = min(1.0, d_next)
    return min(1.0, float(g.sum())), d


def max_cluster_cdf_at(delta: int, p: float, depth: int, k: int) -> float:
    """P(largest open cluster <= k) on the depth-``depth`` delta-ary tree.

    Every vertex, root included, has exactly ``delta`` children; depth 0
    is the single-vertex tree.
    """
    delta = _check_count(delta, "delta")
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise DomainError("openness probability must lie in [0, 1]")
    depth = _check_count(depth, "depth")
    k = _check_count(k, "k")
    cdf, sf = _cluster_sweep(delta, p, depth, k)
    return cdf if sf > 0.5 else 1.0 - sf


def max_cluster_sf_at(delta: int, p: float, depth: int, k: int) -> float:
    """P(largest open cluster > k); relatively accurate however small."""
    delta = _check_count(delta, "delta")
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise DomainError("openness probability must lie in [0, 1]")
    depth = _check_count(depth, "depth")
    k = _check_count(k, "k")
    cdf, sf = _cluster_sweep(delta, p, depth, k)
    return sf if sf <= 0.5 else 1.0 - cdf


def max_cluster_cdf(delta: int, p: float, depth: int,
                    lo_mass: float = 1e-9, hi_mass: float = 1e-12) -> tuple:
    """CDF window of the largest-cluster law: (k0, F) with
    F[j] = P(K <= k0 + j), covering all but ``lo_mass`` on the left and
    ``hi_mass`` on the right.  The window is found by doubling out from
    a rough front estimate; samplers extend it by re-evaluating single
    points for extreme uniforms."""
    if p == 0.0:
        return 0, np.array([1.0])
    from fpp_recovery.exact import percolation_kappa

    kappa = percolation_kappa(p, delta)
    # kappa < 1 also holds above the critical openness 1/delta, where the
    # largest cluster scales with the tree volume and no finite window
    # exists; the sharp smallness criterion is mean open children < 1.
    if kappa >= 1.0 or p * delta >= 1.0:
        raise DomainError(
            "supercritical cluster regime (p=%.6g, growth constant %.6g)"
            % (p, kappa))
    # rough front location: clusters grow like depth / log_delta(1/kappa)
    center = depth / (np.log(1.0 / kappa) / np.log(delta)) if kappa > 0 else 0.0
    hi = max(4, int(center) + 4)
    while max_cluster_sf_at(delta, p, depth, hi) > hi_mass:
        hi *= 2
    half = hi // 2
    while hi - half > 1:  # tighten back down to the first covered k
        mid = (half + hi) // 2
        if max_cluster_sf_at(delta, p, depth, mid) > hi_mass:
            half = mid
        else:
            hi = mid
    lo = 0
    if max_cluster_cdf_at(delta, p, depth, lo) < lo_mass:
        lo_hi = hi
        while lo_hi - lo > 1:
            mid = (lo + lo_hi) // 2
            if max_cluster_cdf_at(delta, p, depth, mid) < lo_mass:
                lo = mid
            else:
                lo_hi = mid
    F = np.array([max_cluster_cdf_at(delta, p, depth, k)
                  for k in range(lo, hi + 1)])
    return lo, F


def sample_max_cluster(delta: int, p: float, depth: int,
                       uniforms: np.ndarray) -> np.ndarray:
    """Largest-cluster draws by CDF inversion: the smallest k with
    P(K <= k) >= u for each uniform.  Uniforms outside the precomputed
    window fall back to exact single-point evaluations."""
    k0, F = max_cluster_cdf(delta, p, depth)
    u = np.minimum(np.asarray(uniforms, dtype=np.float64), 1.0 - 2.0 ** -53)
    idx = np.searchsorted(F, u, side="left")
    out = k0 + idx
    # left tail: searchsorted returned 0 but u may sit below F[0]
    for i in np.flatnonzero(u < F[0]):
        k = k0
        while k > 0 and max_cluster_cdf_at(delta, p, depth, k - 1) >= u[i]:
            k -= 1
        out[i] = k
    # right tail: u above the last tabulated mass; compare survival
    # functions, which stay relatively exact however small they get
    for i in np.flatnonzero(idx == F.size):
        k = k0 + F.size - 1
        target = 1.0 - u[i]
        while max_cluster_sf_at(delta, p, depth, k) > target:
            k += 1
        out[i] = k
    return out.astype(np.int64)
