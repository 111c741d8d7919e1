"""Largest-cluster law on the finite regular tree.

Two independent oracles: complete enumeration over open/closed
configurations in exact rational arithmetic at tiny depth, and literal
site percolation with a DKW band at moderate depth.  Deep-tree checks
pin the numerical design: the survival function must stay relatively
accurate down to the underflow floor at depth 200.
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from fpp_recovery.exact import DomainError
from fpp_recovery.percolation import (
    max_cluster_cdf,
    max_cluster_cdf_at,
    max_cluster_sf_at,
    sample_max_cluster,
)


def _tree_parents(delta, depth):
    """Parent array of the complete delta-ary tree, root first."""
    parents = [-1]
    level = [0]
    nid = 1
    for _ in range(depth):
        nxt = []
        for v in level:
            for _ in range(delta):
                parents.append(v)
                nxt.append(nid)
                nid += 1
        level = nxt
    return parents


def _largest_cluster(parents, open_mask):
    comp = [-1] * len(parents)
    best = 0
    sizes = {}
    for v in range(len(parents)):
        if not open_mask[v]:
            continue
        p = parents[v]
        root = comp[p] if (p >= 0 and open_mask[p]) else v
        comp[v] = root
        sizes[root] = sizes.get(root, 0) + 1
        best = max(best, sizes[root])
    return best


def _enumerate_cdf(delta, depth, p_frac):
    """Exact law of the largest cluster by summing over all 2^n configs."""
    parents = _tree_parents(delta, depth)
    n = len(parents)
    law = {}
    for bits in itertools.product((False, True), repeat=n):
        prob = Fraction(1)
        for b in bits:
            prob *= p_frac if b else (1 - p_frac)
        k = _largest_cluster(parents, bits)
        law[k] = law.get(k, Fraction(0)) + prob
    kmax = max(law)
    cdf = []
    acc = Fraction(0)
    for k in range(kmax + 1):
        acc += law.get(k, Fraction(0))
        cdf.append(acc)
    return cdf


# ---------------------------------------------------------------------------
# exact enumeration oracle


@pytest.mark.parametrize("delta,depth,p_frac", [
    (2, 1, Fraction(1, 4)),
    (2, 2, Fraction(1, 4)),
    (2, 2, Fraction(2, 5)),
    (3, 1, Fraction(1, 5)),
    (3, 2, Fraction(1, 10)),
])
def test_dp_matches_enumeration(delta, depth, p_frac):
    cdf = _enumerate_cdf(delta, depth, p_frac)
    p = float(p_frac)
    for k, want in enumerate(cdf):
        got = max_cluster_cdf_at(delta, p, depth, k)
        assert got == pytest.approx(float(want), rel=1e-12, abs=1e-14), k
        sf = max_cluster_sf_at(delta, p, depth, k)
        assert sf == pytest.approx(float(1 - want), rel=1e-12, abs=1e-14), k
    # everything fits within the enumerated support
    assert max_cluster_cdf_at(delta, p, depth, len(cdf) + 5) == 1.0


def test_depth_zero_is_bernoulli():
    assert max_cluster_cdf_at(2, 0.3, 0, 0) == pytest.approx(0.7)
    assert max_cluster_cdf_at(2, 0.3, 0, 1) == 1.0


# ---------------------------------------------------------------------------
# literal site percolation oracle


def test_dp_matches_literal_percolation():
    delta, depth, p, reps = 2, 8, 0.1, 4000
    parents = _tree_parents(delta, depth)
    rng = np.random.default_rng(314)
    draws = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        draws[i] = _largest_cluster(parents, rng.random(len(parents)) < p)
    # Dvoretzky-Kiefer-Wolfowitz band at alpha = 1e-3
    eps = np.sqrt(np.log(2.0 / 1e-3) / (2.0 * reps))
    for k in range(0, int(draws.max()) + 2):
        empirical = float((draws <= k).mean())
        exact = max_cluster_cdf_at(delta, p, depth, k)
        assert abs(empirical - exact) <= eps, k


def test_samples_match_literal_percolation():
    # sampled through CDF inversion instead of the cdf directly
    delta, depth, p, reps = 2, 9, 0.12, 4000
    parents = _tree_parents(delta, depth)
    rng = np.random.default_rng(2718)
    literal = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        literal[i] = _largest_cluster(parents, rng.random(len(parents)) < p)
    inverted = sample_max_cluster(delta, p, depth,
                                  np.random.default_rng(1).random(reps))
    eps = 2.0 * np.sqrt(np.log(2.0 / 1e-3) / (2.0 * reps))  # both empirical
    hi = int(max(literal.max(), inverted.max())) + 1
    for k in range(hi):
        assert abs((literal <= k).mean() - (inverted <= k).mean()) <= eps, k


# ---------------------------------------------------------------------------
# structural properties


def test_cdf_monotone_in_k_and_depth():
    vals = [max_cluster_cdf_at(2, 0.2, 6, k) for k in range(12)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)
    # deeper trees hold stochastically larger clusters
    by_depth = [max_cluster_cdf_at(2, 0.2, d, 4) for d in (1, 3, 6, 12)]
    assert all(a >= b - 1e-15 for a, b in zip(by_depth, by_depth[1:]))


def test_sf_cdf_consistency():
    for k in range(0, 20, 3):
        cdf = max_cluster_cdf_at(3, 0.15, 7, k)
        sf = max_cluster_sf_at(3, 0.15, 7, k)
        assert cdf + sf == pytest.approx(1.0, abs=1e-12)


def test_p_zero_degenerates():
    assert max_cluster_cdf_at(2, 0.0, 50, 0) == 1.0
    k0, F = max_cluster_cdf(2, 0.0, 50)
    assert k0 == 0 and list(F) == [1.0]
    assert (sample_max_cluster(2, 0.0, 50, np.array([0.1, 0.99])) == 0).all()


def test_supercritical_raises():
    with pytest.raises(DomainError):
        max_cluster_cdf(2, 0.5, 10)   # p * delta = 1: volume-scale clusters
    with pytest.raises(DomainError):
        max_cluster_cdf(2, 0.6, 10)
    with pytest.raises(DomainError):
        sample_max_cluster(3, 0.4, 10, np.array([0.5]))


def test_argument_validation():
    with pytest.raises(DomainError):
        max_cluster_cdf_at(1, 0.1, 5, 3)
    with pytest.raises(DomainError):
        max_cluster_cdf_at(2, 1.2, 5, 3)
    with pytest.raises(DomainError):
        max_cluster_cdf_at(2, 0.1, -1, 3)
    with pytest.raises(DomainError):
        max_cluster_cdf_at(2, 0.1, 5, -3)


# ---------------------------------------------------------------------------
# deep-tree numerical stability


def test_depth_200_front_location():
    # the law at depth 200, p = 0.1 concentrates on a handful of k;
    # these values double as a regression guard for the defect-tracking
    # sweep, which must not lose the distribution to rounding noise
    assert max_cluster_cdf_at(2, 0.1, 200, 110) < 1e-8
    assert max_cluster_cdf_at(2, 0.1, 200, 114) == pytest.approx(
        0.756856080839, rel=1e-6)
    smallest = 0
    while max_cluster_cdf_at(2, 0.1, 200, smallest) < 0.5:
        smallest += 1
    assert smallest == 114


def test_depth_200_sf_stays_relatively_accurate():
    sfs = [max_cluster_sf_at(2, 0.1, 200, k) for k in (120, 130, 136, 160)]
    assert sfs[0] == pytest.approx(3.8263e-4, rel=1e-3)
    assert sfs[1] == pytest.approx(6.721e-9, rel=1e-3)
    assert sfs[2] == pytest.approx(9.598e-12, rel=1e-3)
    assert 0.0 < sfs[3] < 1e-20  # far below float cdf resolution
    assert all(a > b for a, b in zip(sfs, sfs[1:]))


def test_window_covers_the_mass():
    k0, F = max_cluster_cdf(2, 0.1, 200)
    assert F[0] >= 0.0 and F[-1] <= 1.0
    assert (np.diff(F) >= -1e-15).all()
    assert F[0] <= 1e-8           # left edge nearly empty
    assert F[-1] >= 1.0 - 1e-11   # right edge nearly full
    assert k0 <= 114 <= k0 + F.size - 1


def test_extreme_uniforms_walk_the_tails():
    u = np.array([1e-300, 1e-15, 0.5, 1.0 - 1e-13, 1.0])
    out = sample_max_cluster(2, 0.1, 200, u)
    assert (np.diff(out) >= 0).all()
    assert out[2] == 114
    assert out[-1] >= out[-2] >= 130  # deep right tail
    tiny = sample_max_cluster(2, 0.25, 3, np.array([1e-6, 0.999999]))
    assert 0 <= tiny[0] <= tiny[1]
