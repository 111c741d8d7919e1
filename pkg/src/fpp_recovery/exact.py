"""Closed-form reference quantities.

Everything here is deterministic arithmetic: the tail law of red runs
on the semi-line, complete-recovery probabilities from the
inclusion-exclusion recursion, growth/containment constants for
supercritical trees, and the reference curves the Monte Carlo layer
plots against.

Products of many factors and alternating sums are the two numerical
hazards.  Products are carried in log space (the tail law underflows a
float64 near m ~ 170); the alternating complete-recovery sum reports a
condition number (sum of term magnitudes over the result) and refuses
to return float garbage once cancellation eats more than twelve digits,
switching to big-decimal arithmetic on request instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

CONDITION_LIMIT = 1e12


class PrecisionError(ArithmeticError):
    """An exact quantity could not be produced at the requested precision."""


class DomainError(ValueError):
    """Argument outside the domain of a reference curve."""


@dataclass(frozen=True)
class ExactValue:
    """A numeric result together with its log and conditioning.

    ``log_value`` is the natural log of ``value`` computed without
    forming the value itself, so it stays finite after ``value``
    underflows.  ``condition_number`` is 1 for pure products and the
    usual cancellation ratio for alternating sums.
    """

    value: float
    log_value: float
    condition_number: float = 1.0


# ---------------------------------------------------------------------------
# tail law of red runs on the semi-line


def pi_tail(m: int, gamma: float) -> ExactValue:
    """P(tail run >= m): the reciprocal product of (1 + k*gamma), k < m.

    Defined for every integer m >= 0; the empty product makes m = 0 and
    m = 1 both equal to one.
    """
    _check_gamma(gamma)
    m = _check_count(m, "m")
    log_value = -math.fsum(math.log1p(k * gamma) for k in range(1, m))
    if m <= 1:
        log_value = 0.0
    return ExactValue(value=math.exp(log_value), log_value=log_value)


def pi_tail_gamma_form(m: int, gamma: float) -> ExactValue:
    """Same tail probability through the Gamma function:
    gamma^-m * G(1/gamma) / G(m + 1/gamma), valid for m >= 1.

    (Equivalently gamma^-(m-1) * G(1 + 1/gamma) / G(m + 1/gamma); the
    extra factor of gamma is absorbed into the exponent so the identity
    holds for every gamma, not just gamma = 1.)
    """
    _check_gamma(gamma)
    m = _check_count(m, "m")
    if m < 1:
        raise DomainError("gamma-function form needs m >= 1")
    inv = 1.0 / gamma
    log_value = (-m * math.log(gamma)
                 + math.lgamma(inv) - math.lgamma(m + inv))
    if m == 1:
        log_value = 0.0
    return ExactValue(value=math.exp(log_value), log_value=log_value)


def pi_asymptote(m: int) -> float:
    """Leading-order log of the tail law, -m log m, for m >= 2."""
    m = _check_count(m, "m")
    if m < 2:
        raise DomainError("asymptote needs m >= 2")
    return -m * math.log(m)


# ---------------------------------------------------------------------------
# complete recovery: inclusion-exclusion over geometric compositions
#
# S_l(n) sums, over all l-tuples of positive integers x_1..x_l with total
# at most n, the product of (1 + k*gamma)^-x_k.  The recursion peels off
# x_l and reuses a geometric running sum, so the whole triangle up to n
# costs O(n^2) scalar operations.  The loops are written over generic
# numbers on purpose: the same code runs on floats, fractions.Fraction
# (exactness tests) and mpmath.mpf (the high-precision rescue path).


def _s_triangle(n: int, q):
    """Return rows f[l][s] = S-like partial sums for 0 <= l, s <= n.

    ``q(l)`` must return 1/(1 + l*gamma) in the caller's arithmetic.
    Row 0 is identically one; f[l][s] = 0 for s < l.
    """
    one = q(0)  # multiplicative unit in the caller's number type
    zero = one - one
    rows = [[one] * (n + 1)]
    for l in range(1, n + 1):
        ql = q(l)
        prev = rows[l - 1]
        row = [zero] * (n + 1)
        run = zero  # geometric running sum: q*(f[l-1][s-1] + run_prev)
        for s in range(l, n + 1):
            run = ql * (prev[s - 1] + run)
            row[s] = run
        rows.append(row)
    return rows


def _check_gamma(gamma: float):
    if not gamma > 0.0:
        raise DomainError("recovery rate must be positive, got %r" % (gamma,))


def _check_count(value, name: str) -> int:
    if value != int(value) or value < 0:
        raise DomainError("%s must be a nonnegative integer, got %r" % (name, value))
    return int(value)


def s_ell(l: int, n: int, gamma: float) -> ExactValue:
    """The composition sum S_l(n); zero whenever l > n."""
    _check_gamma(gamma)
    l = _check_count(l, "l")
    n = _check_count(n, "n")
    if l == 0:
        return ExactValue(value=1.0, log_value=0.0)
    if l > n:
        return ExactValue(value=0.0, log_value=-math.inf)
    rows = _s_triangle(n, lambda k: 1.0 / (1.0 + k * gamma))
    value = rows[l][n]
    return ExactValue(value=value, log_value=math.log(value))


def s_ell_infinity(l: int, gamma: float) -> ExactValue:
    """Limit of S_l(n) as n grows: 1 / (l! gamma^l)."""
    _check_gamma(gamma)
    l = _check_count(l, "l")
    log_value = -(math.lgamma(l + 1) + l * math.log(gamma))
    if l == 0:
        log_value = 0.0
    return ExactValue(value=math.exp(log_value), log_value=log_value)


def _nu_from_column(column) -> tuple:
    """Alternating sum 1 - S_1 + S_2 - ... and its condition number."""
    terms = [(-1) ** l * column[l] for l in range(1, len(column))]
    total = math.fsum([1.0] + [float(t) for t in terms])
    magnitude = 1.0 + math.fsum(abs(float(t)) for t in terms)
    cond = magnitude / abs(total) if total != 0.0 else math.inf
    return total, cond


def nu_n(n: int, gamma: float, high_precision: bool = False) -> ExactValue:
    """Probability that the process on the semi-line fully recovers
    (no red vertex left) at each of the first n activation instants.

    The float path refuses to answer once the alternating sum loses
    more than ~12 digits to cancellation; pass ``high_precision=True``
    to rerun the recursion in big-decimal arithmetic sized to the
    measured condition number.
    """
    _check_gamma(gamma)
    n = _check_count(n, "n")
    if n == 0:
        return ExactValue(value=1.0, log_value=0.0)
    rows = _s_triangle(n, lambda k: 1.0 / (1.0 + k * gamma))
    column = [rows[l][n] for l in range(n + 1)]
    value, cond = _nu_from_column(column)
    if not high_precision:
        if cond > CONDITION_LIMIT:
            raise PrecisionError(
                "complete-recovery sum at n=%d, gamma=%g is conditioned at %.3g; "
                "rerun with high_precision=True" % (n, gamma, cond))
        if not 0.0 < value < 1.0:
            raise PrecisionError(
                "complete-recovery sum left (0,1) despite condition %.3g" % cond)
        return ExactValue(value=value, log_value=math.log(value),
                          condition_number=max(cond, 1.0))
    import mpmath as mp

    digits = 20 + max(0, int(math.log10(min(max(cond, 1.0), 1e300))) + 1)
    with mp.workdps(digits):
        rows = _s_triangle(n, lambda k: 1 / (1 + k * mp.mpf(gamma)))
        total = mp.mpf(1)
        for l in range(1, n + 1):
            total += (-1) ** l * rows[l][n]
        value = float(total)
        log_value = float(mp.log(total))
    return ExactValue(value=value, log_value=log_value,
                      condition_number=max(cond, 1.0))


def nu_table(n_max: int, gamma: float, high_precision: bool = False) -> list:
    """All of nu_1..nu_{n_max} from a single recursion triangle.

    Returns a list of :class:`ExactValue`; same precision policy as
    :func:`nu_n`.
    """
    _check_gamma(gamma)
    n_max = _check_count(n_max, "n_max")
    if n_max == 0:
        return []
    rows = _s_triangle(n_max, lambda k: 1.0 / (1.0 + k * gamma))
    conds = []
    for n in range(1, n_max + 1):
        _, cond = _nu_from_column([rows[l][n] for l in range(n + 1)])
        conds.append(cond)
    worst = max(conds)
    if not high_precision:
        if worst > CONDITION_LIMIT:
            raise PrecisionError(
                "complete-recovery table up to n=%d, gamma=%g is conditioned "
                "at %.3g; rerun with high_precision=True" % (n_max, gamma, worst))
        out = []
        for n in range(1, n_max + 1):
            value, cond = _nu_from_column([rows[l][n] for l in range(n + 1)])
            if not 0.0 < value < 1.0:
                raise PrecisionError(
                    "complete-recovery sum left (0,1) at n=%d" % n)
            out.append(ExactValue(value=value, log_value=math.log(value),
                                  condition_number=max(cond, 1.0)))
        return out
    import mpmath as mp

    digits = 20 + max(0, int(math.log10(min(max(worst, 1.0), 1e300))) + 1)
    out = []
    with mp.workdps(digits):
        mrows = _s_triangle(n_max, lambda k: 1 / (1 + k * mp.mpf(gamma)))
        for n in range(1, n_max + 1):
            total = mp.mpf(1)
            for l in range(1, n + 1):
                total += (-1) ** l * mrows[l][n]
            out.append(ExactValue(value=float(total),
                                  log_value=float(mp.log(total)),
                                  condition_number=max(conds[n - 1], 1.0)))
    return out


def nu_limit(gamma: float) -> float:
    """Large-n limit of the complete-recovery probability, e^(-1/gamma)."""
    _check_gamma(gamma)
    return math.exp(-1.0 / gamma)


# ---------------------------------------------------------------------------
# growth and containment constants for supercritical trees


def c_tilde(mean: float, tol: float = 1e-9) -> float:
    """Unique root above ``mean`` of g(c) = 1 + c log c - c (1 + log mean).

    g is negative at the mean and convex increasing beyond it, so plain
    bisection applies.  The returned point c* keeps g(c*) >= 0 while
    c* - tol is still below the root.
    """
    if not mean > 1.0:
        raise DomainError("containment constant needs mean > 1, got %r" % (mean,))
    if not tol > 0.0:
        raise DomainError("tol must be positive")

    def g(c):
        return 1.0 + c * math.log(c) - c * (1.0 + math.log(mean))

    lo = mean
    hi = 2.0 * mean
    while g(hi) < 0.0:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def containment_overshoot_rate(mean: float, c: float) -> float:
    """g(c) evaluated at an arbitrary c > 1 (the Chernoff exponent)."""
    if not mean > 1.0:
        raise DomainError("needs mean > 1")
    if not c > 0.0:
        raise DomainError("needs c > 0")
    return 1.0 + c * math.log(c) - c * (1.0 + math.log(mean))


def percolation_kappa(p: float, delta: int) -> float:
    """Cluster growth constant p (1-p)^(delta-1) delta^delta / (delta-1)^(delta-1)."""
    delta = _check_count(delta, "delta")
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise DomainError("openness probability must lie in [0, 1]")
    return (p * (1.0 - p) ** (delta - 1)
            * delta ** delta / (delta - 1) ** (delta - 1))


def percolation_constants(gamma: float, delta: int) -> tuple:
    """(p, kappa) for the high-recovery comparison on the delta-regular
    tree: p = delta / (gamma + delta) and the growth constant at p."""
    _check_gamma(gamma)
    delta = _check_count(delta, "delta")
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    p = delta / (gamma + delta)
    return p, percolation_kappa(p, delta)


def gamma_c(delta: int, epsilon: float, c_bar: float, tol: float = 1e-9) -> float:
    """Smallest recovery rate at which the static cluster bound beats
    epsilon: kappa < 1 and delta * c_bar / log_delta(1/kappa) <= epsilon.

    The left side decreases in gamma beyond the kappa < 1 threshold
    gamma = delta^2 - delta, so bisection on [threshold, hi] applies.
    """
    delta = _check_count(delta, "delta")
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    if not epsilon > 0.0 or not c_bar > 0.0 or not tol > 0.0:
        raise DomainError("epsilon, c_bar and tol must all be positive")

    def ok(gamma):
        _, kappa = percolation_constants(gamma, delta)
        if not kappa < 1.0:
            return False
        ratio = math.log(1.0 / kappa) / math.log(delta)
        return delta * c_bar / ratio <= epsilon

    lo = float(delta * delta - delta)  # kappa == 1 exactly here
    hi = max(2.0 * lo, 1.0)
    for _ in range(200):
        if ok(hi):
            break
        hi *= 2.0
    else:
        raise PrecisionError("no recovery rate satisfied the bound")
    # tol is absolute; for very small epsilon the answer sits at a
    # magnitude where adjacent floats are further apart than tol, so
    # also stop once the midpoint stops moving
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# reference curves

CURVE_NAMES = (
    "limsup_line",          # log t / log log t
    "h_liminf",             # alpha t / log t
    "m_liminf",             # alpha t / log log t
    "log_growth",           # alpha t
    "h_threshold",          # r log x / log log x
    "m_threshold",          # r log x / log log log x
    "percolation_cluster",  # floor(c_bar t) / log_delta(1 / kappa)
)

_E = math.e
_EE = math.exp(math.e)


def _require(name: str, value):
    if value is None:
        raise DomainError("curve needs parameter %r" % (name,))
    return value


def reference_curves(value: float, which: str, alpha: float = None,
                     r: float = None, c_bar: float = None,
                     delta: int = None, kappa: float = None) -> float:
    """Evaluate one named asymptotic reference curve at ``value``.

    Curves with iterated logs raise :class:`DomainError` wherever the
    innermost iterated log is not strictly positive.
    """
    if which not in CURVE_NAMES:
        raise DomainError("unknown curve %r; choose from %s"
                          % (which, ", ".join(CURVE_NAMES)))
    t = float(value)
    if which == "limsup_line":
        if t <= _E:
            raise DomainError("limsup_line needs t > e")
        return math.log(t) / math.log(math.log(t))
    if which == "h_liminf":
        if t <= 1.0:
            raise DomainError("h_liminf needs t > 1")
        return _require("alpha", alpha) * t / math.log(t)
    if which == "m_liminf":
        if t <= _E:
            raise DomainError("m_liminf needs t > e")
        return _require("alpha", alpha) * t / math.log(math.log(t))
    if which == "log_growth":
        return _require("alpha", alpha) * t
    if which == "h_threshold":
        if t <= _E:
            raise DomainError("h_threshold needs x > e")
        return _require("r", r) * math.log(t) / math.log(math.log(t))
    if which == "m_threshold":
        if t <= _EE:
            raise DomainError("m_threshold needs x > e^e")
        return _require("r", r) * math.log(t) / math.log(math.log(math.log(t)))
    # percolation_cluster
    c_bar = _require("c_bar", c_bar)
    delta = _check_count(_require("delta", delta), "delta")
    kappa = _require("kappa", kappa)
    if delta < 2:
        raise DomainError("regular tree degree must be >= 2")
    if not 0.0 <= kappa < 1.0:
        raise DomainError("cluster constant must lie in [0, 1)")
    if kappa == 0.0:
        return 0.0
    return math.floor(c_bar * t) / (math.log(1.0 / kappa) / math.log(delta))
