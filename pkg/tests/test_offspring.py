"""Offspring grammar, moments, sampling laws and extinction."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import brentq

from fpp_recovery import (
    OffspringError,
    OffspringSpec,
    extinction_probability,
    offspring_mean,
    parse_offspring,
    sample_offspring,
    sample_offspring_batch,
)


# ---------------------------------------------------------------------------
# grammar


def test_parse_every_kind():
    assert parse_offspring("semiline") == OffspringSpec("semiline")
    assert parse_offspring("det:3") == OffspringSpec("det", (3,))
    assert parse_offspring("bin:2:0.8") == OffspringSpec("bin", (2, 0.8))
    assert parse_offspring("pois:1.5") == OffspringSpec("pois", (1.5,))
    assert parse_offspring("geom:0.25") == OffspringSpec("geom", (0.25,))
    assert parse_offspring("pmf:0.1,0.2,0.7") == OffspringSpec(
        "pmf", (0.1, 0.2, 0.7))


def test_text_round_trip():
    for text in ("semiline", "det:2", "bin:5:0.3", "pois:2.25",
                 "geom:0.5", "pmf:0.25,0.5,0.25"):
        spec = parse_offspring(text)
        assert parse_offspring(spec.text()) == spec


def test_parse_tolerates_whitespace():
    assert parse_offspring("  det:4  ") == OffspringSpec("det", (4,))


@pytest.mark.parametrize("bad", [
    "", "   ", "tree", "det", "det:1:2", "det:-1", "det:1.5",
    "bin:2", "bin:2:1.5", "bin:2:-0.1", "bin:x:0.5",
    "pois:-1", "pois:", "geom:0", "geom:1.0001", "geom:-0.3",
    "pmf:", "pmf:0.5,0.6", "pmf:-0.2,1.2", "semiline:1",
])
def test_malformed_specs_raise(bad):
    with pytest.raises(OffspringError):
        parse_offspring(bad)


def test_pmf_category_cap():
    ok = "pmf:" + ",".join(["0.015625"] * 64)
    assert parse_offspring(ok).max_children == 63
    too_many = "pmf:" + ",".join(["0.01"] * 99 + ["0.01"])
    with pytest.raises(OffspringError):
        parse_offspring(too_many)


def test_direct_constructor_validates():
    with pytest.raises(OffspringError):
        OffspringSpec("bin", (2,))
    with pytest.raises(OffspringError):
        OffspringSpec("nope")


# ---------------------------------------------------------------------------
# moments and support


def test_means():
    assert offspring_mean(parse_offspring("semiline")) == 1.0
    assert offspring_mean(parse_offspring("det:3")) == 3.0
    assert offspring_mean(parse_offspring("bin:2:0.8")) == pytest.approx(1.6)
    assert offspring_mean(parse_offspring("pois:2.5")) == 2.5
    # geometric on {0, 1, ...} has mean (1-p)/p
    assert offspring_mean(parse_offspring("geom:0.25")) == pytest.approx(3.0)
    assert offspring_mean(parse_offspring("pmf:0.2,0.3,0.5")) == pytest.approx(1.3)


def test_support_and_flags():
    assert parse_offspring("semiline").max_children == 1
    assert parse_offspring("det:4").max_children == 4
    assert parse_offspring("bin:6:0.1").max_children == 6
    assert parse_offspring("pois:1.0").max_children == -1
    assert parse_offspring("geom:0.5").max_children == -1
    assert parse_offspring("pmf:0.5,0.5").max_children == 1
    assert parse_offspring("det:2").supercritical
    assert not parse_offspring("semiline").supercritical


# ---------------------------------------------------------------------------
# sampling laws


def _chi_square_against(spec_text, pmf, n_draws=40000, seed=101):
    """Chi-square p-value of batch draws against an exact pmf callable."""
    spec = parse_offspring(spec_text)
    rng = np.random.default_rng(seed)
    draws = sample_offspring_batch(spec, rng, n_draws)
    kmax = int(draws.max())
    observed = np.bincount(draws, minlength=kmax + 1).astype(float)
    expected = np.array([pmf(k) for k in range(kmax + 1)]) * n_draws
    # fold the sparse tail into one cell so every expected count is >= 5
    while expected.size > 2 and expected[-1] < 5:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected = expected[:-1]
        observed = observed[:-1]
    tail = n_draws - expected.sum()
    if tail > 0:
        expected = np.append(expected, tail)
        observed = np.append(observed, 0.0)
    chi2 = ((observed - expected) ** 2 / expected).sum()
    return stats.chi2.sf(chi2, df=expected.size - 1)


def test_binomial_sampling_law():
    assert _chi_square_against(
        "bin:4:0.35", lambda k: stats.binom.pmf(k, 4, 0.35)) > 1e-3


def test_poisson_sampling_law():
    assert _chi_square_against(
        "pois:2.2", lambda k: stats.poisson.pmf(k, 2.2)) > 1e-3


def test_geometric_sampling_law():
    # failures-before-success convention: P(k) = p (1-p)^k on {0, 1, ...}
    assert _chi_square_against(
        "geom:0.3", lambda k: 0.3 * 0.7 ** k) > 1e-3


def test_pmf_sampling_law():
    table = (0.15, 0.35, 0.05, 0.45)
    assert _chi_square_against(
        "pmf:0.15,0.35,0.05,0.45",
        lambda k: table[k] if k < len(table) else 0.0) > 1e-3


def test_deterministic_kinds_draw_nothing():
    rng = np.random.default_rng(7)
    before = rng.bit_generator.state["state"]["state"]
    assert sample_offspring(parse_offspring("semiline"), rng) == 1
    assert sample_offspring(parse_offspring("det:5"), rng) == 5
    assert (sample_offspring_batch(parse_offspring("det:2"), rng, 10) == 2).all()
    assert rng.bit_generator.state["state"]["state"] == before


def test_batch_matches_scalar_stream():
    for text in ("bin:3:0.4", "pois:1.7", "geom:0.35", "pmf:0.2,0.5,0.3"):
        spec = parse_offspring(text)
        batch = sample_offspring_batch(spec, np.random.default_rng(42), 64)
        rng = np.random.default_rng(42)
        scalar = np.array([sample_offspring(spec, rng) for _ in range(64)])
        assert (batch == scalar).all(), text


def test_samples_are_nonnegative_ints():
    rng = np.random.default_rng(0)
    for text in ("geom:0.2", "pois:3.0", "bin:5:0.5", "pmf:0.5,0.25,0.25"):
        draws = sample_offspring_batch(parse_offspring(text), rng, 1000)
        assert draws.dtype == np.int64
        assert (draws >= 0).all()


# ---------------------------------------------------------------------------
# extinction probability


def test_extinction_bin_2_08_is_one_sixteenth():
    # (0.2 + 0.8 s)^2 = s has roots 1/16 and 1
    q = extinction_probability(parse_offspring("bin:2:0.8"))
    assert q == pytest.approx(1.0 / 16.0, abs=1e-12)


def test_extinction_subcritical_and_critical_are_one():
    assert extinction_probability(parse_offspring("bin:2:0.4")) == 1.0
    assert extinction_probability(parse_offspring("pois:1.0")) == 1.0
    assert extinction_probability(parse_offspring("semiline")) == 1.0


def test_extinction_det_is_zero():
    assert extinction_probability(parse_offspring("det:2")) == 0.0


def test_extinction_geom_closed_form():
    # p/(1 - (1-p) s) = s gives q = p/(1-p) when mean > 1
    p = 0.25
    q = extinction_probability(parse_offspring("geom:0.25"))
    assert q == pytest.approx(p / (1.0 - p), abs=1e-10)


def test_extinction_pois_against_root_finder():
    lam = 1.5
    q = extinction_probability(parse_offspring("pois:1.5"))
    root = brentq(lambda s: math.exp(lam * (s - 1.0)) - s, 0.0, 1.0 - 1e-9)
    assert q == pytest.approx(root, abs=1e-9)
