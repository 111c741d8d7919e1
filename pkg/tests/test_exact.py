"""Closed-form layer: tail law, recovery sums, constants, curves.

The brute-force oracles here re-derive everything through a second
route: factorials and lgamma for the tail law, explicit composition
enumeration in exact rational arithmetic for the S_l sums, root
finding for the constants.
"""

import itertools
import math
from fractions import Fraction

import pytest

from fpp_recovery import (
    DomainError,
    PrecisionError,
    c_tilde,
    gamma_c,
    nu_limit,
    nu_n,
    nu_table,
    percolation_constants,
    percolation_kappa,
    pi_asymptote,
    pi_tail,
    pi_tail_gamma_form,
    reference_curves,
    s_ell,
    s_ell_infinity,
)
from fpp_recovery.exact import CURVE_NAMES, containment_overshoot_rate, _s_triangle


# ---------------------------------------------------------------------------
# tail law


def test_pi_tail_hand_values():
    assert pi_tail(0, 1.0).value == 1.0
    assert pi_tail(1, 1.0).value == 1.0
    assert pi_tail(2, 1.0).value == pytest.approx(0.5, rel=1e-15)
    # gamma = 1: 1/(2*3*4) = 1/24
    assert pi_tail(4, 1.0).value == pytest.approx(1.0 / 24.0, rel=1e-14)
    # gamma = 1/2: 1/(1.5 * 2 * 2.5) = 2/15
    assert pi_tail(4, 0.5).value == pytest.approx(2.0 / 15.0, rel=1e-14)


def test_pi_tail_is_factorial_reciprocal_at_gamma_one():
    for m in range(1, 30):
        assert pi_tail(m, 1.0).value == pytest.approx(
            1.0 / math.factorial(m), rel=1e-12)


def test_pi_tail_monotone_and_in_unit_interval():
    for gamma in (0.1, 1.0, 3.0):
        values = [pi_tail(m, gamma).value for m in range(0, 40)]
        assert all(0.0 < v <= 1.0 for v in values)
        assert all(a >= b for a, b in zip(values, values[1:]))
    for m in (2, 5, 17):
        assert pi_tail(m, 0.5).value > pi_tail(m, 1.0).value > pi_tail(m, 2.0).value


def test_pi_tail_log_survives_underflow():
    big = pi_tail(500, 1.0)
    assert big.value == 0.0  # the plain float underflows
    assert math.isfinite(big.log_value)
    assert big.log_value == pytest.approx(-math.lgamma(501), rel=1e-12)


def test_gamma_form_identity_on_grid():
    for gamma in (0.1, 0.5, 1.0, 2.0, 10.0):
        for m in (1, 2, 3, 7, 50, 170, 400, 1000):
            a = pi_tail(m, gamma).log_value
            b = pi_tail_gamma_form(m, gamma).log_value
            assert b == pytest.approx(a, abs=1e-10 * max(1.0, abs(a))), (m, gamma)


def test_gamma_form_needs_positive_m():
    with pytest.raises(DomainError):
        pi_tail_gamma_form(0, 1.0)


def test_asymptote_value_and_slow_approach():
    assert pi_asymptote(200) == -200.0 * math.log(200.0)
    with pytest.raises(DomainError):
        pi_asymptote(1)
    # the ratio log Pi(m) / (-m log m) climbs toward 1 but only as
    # 1 - O(1/log m); at m = 200 it is still far from 1
    ratios = [pi_tail(m, 1.0).log_value / pi_asymptote(m)
              for m in (50, 200, 1000, 100000)]
    assert ratios == sorted(ratios)
    assert ratios[1] == pytest.approx(0.814628, abs=1e-5)
    assert ratios[-1] < 0.92  # nowhere near converged even at m = 1e5


def test_domain_errors_on_bad_arguments():
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            pi_tail(3, bad)
    with pytest.raises(DomainError):
        pi_tail(-1, 1.0)
    with pytest.raises(DomainError):
        pi_tail(2.5, 1.0)


# ---------------------------------------------------------------------------
# S_l sums: DP against explicit composition enumeration


def _brute_s_ell(l, n, gamma_frac):
    """Sum over all l-tuples of positive integers with total <= n of
    prod_k (1 + k*gamma)^(-x_k), in exact rational arithmetic."""
    if l == 0:
        return Fraction(1)
    total = Fraction(0)
    weights = [Fraction(1) / (1 + k * gamma_frac) for k in range(l + 1)]
    for xs in itertools.product(range(1, n + 1), repeat=l):
        if sum(xs) > n:
            continue
        term = Fraction(1)
        for k, x in enumerate(xs, start=1):
            term *= weights[k] ** x
        total += term
    return total


@pytest.mark.parametrize("gamma_frac", [Fraction(1), Fraction(1, 2), Fraction(2)])
def test_s_triangle_equals_enumeration_exactly(gamma_frac):
    n = 8
    rows = _s_triangle(n, lambda k: Fraction(1) / (1 + k * gamma_frac))
    for l in range(0, n + 1):
        assert rows[l][n] == _brute_s_ell(l, n, gamma_frac), l


def test_s_ell_float_matches_enumeration():
    for l in range(0, 7):
        exact_value = _brute_s_ell(l, 6, Fraction(1, 2))
        assert s_ell(l, 6, 0.5).value == pytest.approx(
            float(exact_value), rel=1e-13)


def test_s_ell_edge_cases():
    assert s_ell(0, 5, 1.0).value == 1.0
    gone = s_ell(7, 5, 1.0)
    assert gone.value == 0.0 and gone.log_value == -math.inf
    assert s_ell(0, 0, 1.0).value == 1.0


def test_s_ell_increases_to_infinity_limit():
    for l in (1, 2, 3, 4):
        limit = s_ell_infinity(l, 1.0).value
        assert limit == pytest.approx(1.0 / math.factorial(l), rel=1e-14)
        seq = [s_ell(l, n, 1.0).value for n in (10, 20, 50, 100)]
        assert seq == sorted(seq)
        assert seq[-1] == pytest.approx(limit, rel=1e-12)
        assert all(v <= limit * (1 + 1e-12) for v in seq)


def test_s_ell_infinity_alternating_sum_hits_limit():
    # 1 + sum_l (-1)^l / (l! gamma^l) telescopes to e^(-1/gamma)
    for gamma in (0.5, 1.0, 2.0):
        total, l = 1.0, 1
        while True:
            term = s_ell_infinity(l, gamma).value
            if term < 1e-18:
                break
            total += (-1) ** l * term
            l += 1
        assert total == pytest.approx(nu_limit(gamma), abs=1e-14)


# ---------------------------------------------------------------------------
# complete-recovery probabilities


def test_nu_hand_values():
    # S_1(2) = 3/4, S_2(2) = 1/6 at gamma = 1
    assert nu_n(2, 1.0).value == pytest.approx(5.0 / 12.0, rel=1e-14)
    # n = 1: 1 - 1/(1 + gamma)
    assert nu_n(1, 2.0).value == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert nu_n(1, 1.0).value == pytest.approx(0.5, rel=1e-14)
    assert nu_n(0, 1.0).value == 1.0


def test_nu_matches_rational_enumeration():
    for gamma_frac in (Fraction(1), Fraction(2)):
        for n in range(1, 7):
            expected = Fraction(1)
            for l in range(1, n + 1):
                expected += (-1) ** l * _brute_s_ell(l, n, gamma_frac)
            got = nu_n(n, float(gamma_frac)).value
            assert got == pytest.approx(float(expected), rel=1e-12), (gamma_frac, n)


def test_nu_table_consistent_with_nu_n():
    table = nu_table(30, 1.0)
    assert len(table) == 30
    for n in range(1, 31):
        assert table[n - 1].value == nu_n(n, 1.0).value
    assert nu_table(0, 1.0) == []


def test_nu_limit_convergence():
    for gamma in (1.0, 2.0):
        assert abs(nu_n(200, gamma).value - nu_limit(gamma)) <= 1e-3
    # convergence at gamma = 1 is much faster than the stated envelope
    assert nu_n(50, 1.0).value == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_nu_values_stay_in_unit_interval():
    for val in nu_table(120, 0.7):
        assert 0.0 < val.value < 1.0
        assert val.condition_number >= 1.0


def test_nu_refuses_catastrophic_cancellation():
    with pytest.raises(PrecisionError):
        nu_n(80, 0.05)
    with pytest.raises(PrecisionError):
        nu_table(80, 0.05)


def test_nu_high_precision_rescues_small_gamma():
    rescued = nu_n(80, 0.05, high_precision=True)
    assert 0.0 < rescued.value < 1.0
    assert rescued.condition_number > 1e12
    # the rescued value agrees with the limit to the expected order
    assert rescued.value == pytest.approx(nu_limit(0.05), rel=0.5)
    table = nu_table(200, 0.2, high_precision=True)
    assert abs(table[-1].value - nu_limit(0.2)) < 1e-12


# ---------------------------------------------------------------------------
# growth and containment constants


def test_c_tilde_defining_inequalities():
    for mean in (1.2, 2.0, 3.0, 10.0):
        c = c_tilde(mean)
        assert containment_overshoot_rate(mean, c) >= 0.0
        assert containment_overshoot_rate(mean, c - 1e-6) < 0.0
        assert c > mean


def test_c_tilde_reference_value():
    assert c_tilde(2.0) == pytest.approx(4.311070407507941, abs=1e-8)


def test_c_tilde_domain():
    with pytest.raises(DomainError):
        c_tilde(1.0)
    with pytest.raises(DomainError):
        c_tilde(2.0, tol=0.0)


def test_overshoot_rate_signs():
    # g is negative at the mean and positive past the root
    assert containment_overshoot_rate(2.0, 2.0) < 0.0
    assert containment_overshoot_rate(2.0, 5.0) > 0.0
    with pytest.raises(DomainError):
        containment_overshoot_rate(0.9, 2.0)


def test_percolation_constants_examples():
    p, kappa = percolation_constants(18.0, 2)
    assert p == pytest.approx(0.1, rel=1e-15)
    assert kappa == pytest.approx(0.36, rel=1e-12)
    p, kappa = percolation_constants(27.0, 3)
    assert p == pytest.approx(0.1, rel=1e-15)
    assert kappa == pytest.approx(0.54675, rel=1e-12)


def test_percolation_p_vanishes_with_gamma():
    last = 1.0
    for gamma in (1.0, 10.0, 100.0, 10000.0):
        p, _ = percolation_constants(gamma, 2)
        assert p < last
        last = p
    assert last < 1e-3


def test_percolation_kappa_critical_point():
    # kappa peaks at exactly 1 when p = 1/delta
    assert percolation_kappa(0.5, 2) == pytest.approx(1.0, rel=1e-14)
    assert percolation_kappa(1.0 / 3.0, 3) == pytest.approx(1.0, rel=1e-12)
    assert percolation_kappa(0.0, 4) == 0.0
    with pytest.raises(DomainError):
        percolation_kappa(0.3, 1)
    with pytest.raises(DomainError):
        percolation_kappa(1.2, 2)


def test_gamma_c_contract():
    c_bar = c_tilde(2.0)

    def satisfied(gamma):
        p, kappa = percolation_constants(gamma, 2)
        if not kappa < 1.0:
            return False
        return 2.0 * c_bar / (math.log(1.0 / kappa) / math.log(2.0)) <= 1.0

    g = gamma_c(2, 1.0, c_bar)
    assert satisfied(g)
    assert not satisfied(g - 1e-6)
    # halving epsilon pushes the threshold strictly up
    assert gamma_c(2, 0.5, c_bar) > g
    with pytest.raises(DomainError):
        gamma_c(2, -1.0, c_bar)


def test_gamma_c_tiny_epsilon_terminates():
    # the threshold lands near 1e52 where adjacent floats are ~1e36
    # apart, far beyond any absolute tolerance; the bisection must
    # stop at the float fixed point instead of looping
    c_bar = c_tilde(2.0)
    g = gamma_c(2, 0.05, c_bar)
    assert 1e50 < g < 1e55
    p, kappa = percolation_constants(g, 2)
    assert 2.0 * c_bar / (math.log(1.0 / kappa) / math.log(2.0)) <= 0.05


# ---------------------------------------------------------------------------
# reference curves


def test_curve_examples():
    # at t = e^e the inner log equals 1
    assert reference_curves(math.exp(math.e), "limsup_line") == pytest.approx(
        math.e, rel=1e-12)
    assert reference_curves(10.0, "log_growth", alpha=0.6) == pytest.approx(6.0)
    assert reference_curves(100.0, "h_liminf", alpha=0.6) == pytest.approx(
        60.0 / math.log(100.0), rel=1e-14)
    assert reference_curves(100.0, "m_liminf", alpha=0.5) == pytest.approx(
        50.0 / math.log(math.log(100.0)), rel=1e-14)
    assert reference_curves(1000.0, "h_threshold", r=0.5) == pytest.approx(
        0.5 * math.log(1000.0) / math.log(math.log(1000.0)), rel=1e-14)
    got = reference_curves(10.0, "percolation_cluster", c_bar=4.3,
                           delta=2, kappa=0.36)
    assert got == pytest.approx(43.0 / (math.log(1 / 0.36) / math.log(2)),
                                rel=1e-12)


def test_curve_domain_errors():
    with pytest.raises(DomainError):
        reference_curves(2.0, "limsup_line")  # needs t > e
    with pytest.raises(DomainError):
        reference_curves(1.0, "h_liminf", alpha=0.6)
    with pytest.raises(DomainError):
        reference_curves(10.0, "m_threshold", r=0.5)  # needs x > e^e
    with pytest.raises(DomainError):
        reference_curves(10.0, "h_liminf")  # missing alpha
    with pytest.raises(DomainError):
        reference_curves(10.0, "no_such_curve")
    with pytest.raises(DomainError):
        reference_curves(10.0, "percolation_cluster", c_bar=1.0, delta=2,
                         kappa=1.0)


def test_curve_zero_kappa_degenerates():
    assert reference_curves(5.0, "percolation_cluster", c_bar=1.0, delta=3,
                            kappa=0.0) == 0.0


def test_curve_name_table_is_stable():
    assert set(CURVE_NAMES) == {
        "limsup_line", "h_liminf", "m_liminf", "log_growth",
        "h_threshold", "m_threshold", "percolation_cluster"}
