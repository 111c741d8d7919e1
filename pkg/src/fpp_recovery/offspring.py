"""Offspring distributions for the growth graph.

The process runs either on the semi-line (every vertex has exactly one
child) or on a Galton-Watson tree whose offspring law lives on the
nonnegative integers.  A spec is a small immutable value; samplers take
an explicit :class:`numpy.random.Generator` so each replication owns an
independent stream.

Text grammar accepted by :func:`parse_offspring`::

    semiline            half-infinite path
    det:d               deterministic d children
    bin:n:p             Binomial(n, p)
    pois:lambda         Poisson(lambda)
    geom:p              Geometric on {0, 1, ...}, P(k) = p (1-p)^k
    pmf:p0,p1,...       explicit law, at most 64 categories

Draw budget, which the engine relies on for stream replay: ``semiline``
and ``det`` consume no generator calls, ``bin``/``pois``/``geom``
consume exactly one generator call, ``pmf`` consumes one uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PMF_CATEGORY_CAP = 64
_PMF_SUM_TOL = 1e-12

_KINDS = ("semiline", "det", "bin", "pois", "geom", "pmf")


class OffspringError(ValueError):
    """Malformed offspring specification."""


@dataclass(frozen=True)
class OffspringSpec:
    """Immutable description of an offspring law.

    ``kind`` is one of ``semiline``, ``det``, ``bin``, ``pois``,
    ``geom``, ``pmf``; ``params`` holds the numeric parameters in grammar
    order.  The semi-line behaves like det:1 for sampling and boundary
    purposes but is kept distinct because several observables (tail
    runs, the jump chain) are only defined on the path.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        _validate(self.kind, self.params)

    @property
    def mean(self) -> float:
        return offspring_mean(self)

    @property
    def supercritical(self) -> bool:
        return self.mean > 1.0

    @property
    def max_children(self) -> int:
        """Hard support bound, or -1 when the support is unbounded."""
        if self.kind in ("semiline",):
            return 1
        if self.kind == "det":
            return int(self.params[0])
        if self.kind == "bin":
            return int(self.params[0])
        if self.kind == "pmf":
            return len(self.params) - 1
        return -1

    def text(self) -> str:
        """Grammar string that parses back to an equal spec."""
        if self.kind == "semiline":
            return "semiline"
        if self.kind == "det":
            return "det:%d" % self.params[0]
        if self.kind == "bin":
            return "bin:%d:%s" % (self.params[0], repr(float(self.params[1])))
        if self.kind == "pois":
            return "pois:%s" % repr(float(self.params[0]))
        if self.kind == "geom":
            return "geom:%s" % repr(float(self.params[0]))
        return "pmf:" + ",".join(repr(float(p)) for p in self.params)


def _validate(kind, params):
    if kind not in _KINDS:
        raise OffspringError("unknown offspring kind %r" % (kind,))
    if kind == "semiline":
        if params:
            raise OffspringError("semiline takes no parameters")
    elif kind == "det":
        if len(params) != 1 or params[0] != int(params[0]) or params[0] < 0:
            raise OffspringError("det:d needs one integer d >= 0")
    elif kind == "bin":
        if len(params) != 2:
            raise OffspringError("bin:n:p needs two parameters")
        n, p = params
        if n != int(n) or n < 0:
            raise OffspringError("bin:n:p needs integer n >= 0")
        if not 0.0 <= p <= 1.0:
            raise OffspringError("bin:n:p needs p in [0, 1]")
    elif kind == "pois":
        if len(params) != 1 or not params[0] >= 0.0:
            raise OffspringError("pois:lambda needs lambda >= 0")
    elif kind == "geom":
        if len(params) != 1 or not 0.0 < params[0] <= 1.0:
            raise OffspringError("geom:p needs p in (0, 1]")
    elif kind == "pmf":
        if not params:
            raise OffspringError("pmf needs at least one entry")
        if len(params) > PMF_CATEGORY_CAP:
            raise OffspringError(
                "pmf supports at most %d categories, got %d"
                % (PMF_CATEGORY_CAP, len(params)))
        if any(p < 0.0 for p in params):
            raise OffspringError("pmf entries must be >= 0")
        if abs(math.fsum(params) - 1.0) > _PMF_SUM_TOL:
            raise OffspringError(
                "pmf entries must sum to 1 within %g (got %.17g)"
                % (_PMF_SUM_TOL, math.fsum(params)))


def parse_offspring(text: str) -> OffspringSpec:
    """Parse the ``kind:params`` grammar into a spec.

    Raises :class:`OffspringError` on anything malformed.
    """
    if not isinstance(text, str) or not text.strip():
        raise OffspringError("empty offspring description")
    parts = text.strip().split(":")
    kind = parts[0]
    args = parts[1:]
    try:
        if kind == "semiline":
            if args:
                raise OffspringError("semiline takes no parameters")
            return OffspringSpec("semiline")
        if kind == "det":
            (d,) = args
            return OffspringSpec("det", (int(d),))
        if kind == "bin":
            n, p = args
            return OffspringSpec("bin", (int(n), float(p)))
        if kind == "pois":
            (lam,) = args
            return OffspringSpec("pois", (float(lam),))
        if kind == "geom":
            (p,) = args
            return OffspringSpec("geom", (float(p),))
        if kind == "pmf":
            if len(args) != 1:
                raise OffspringError("pmf takes a single comma list")
            entries = tuple(float(x) for x in args[0].split(","))
            return OffspringSpec("pmf", entries)
    except OffspringError:
        raise
    except (TypeError, ValueError) as exc:
        raise OffspringError("cannot parse offspring %r: %s" % (text, exc)) from exc
    raise OffspringError("unknown offspring kind %r" % (kind,))


def offspring_mean(spec: OffspringSpec) -> float:
    """Expected number of children."""
    k = spec.kind
    if k == "semiline":
        return 1.0
    if k == "det":
        return float(spec.params[0])
    if k == "bin":
        return float(spec.params[0]) * spec.params[1]
    if k == "pois":
        return float(spec.params[0])
    if k == "geom":
        p = spec.params[0]
        return (1.0 - p) / p
    return float(sum(i * p for i, p in enumerate(spec.params)))


@lru_cache(maxsize=128)
def _pmf_cdf(params: tuple) -> np.ndarray:
    return np.cumsum(np.asarray(params, dtype=np.float64))


def sample_offspring(spec: OffspringSpec, rng: np.random.Generator) -> int:
    """Draw one offspring count.  See the module docstring for the
    exact number of generator calls consumed per kind."""
    k = spec.kind
    if k == "semiline":
        return 1
    if k == "det":
        return int(spec.params[0])
    if k == "bin":
        return int(rng.binomial(spec.params[0], spec.params[1]))
    if k == "pois":
        return int(rng.poisson(spec.params[0]))
    if k == "geom":
        # numpy's geometric counts trials on {1, 2, ...}; shift to failures
        return int(rng.geometric(spec.params[0])) - 1
    cdf = _pmf_cdf(spec.params)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(idx, len(cdf) - 1)


def sample_offspring_batch(spec: OffspringSpec, rng: np.random.Generator,
                           size: int) -> np.ndarray:
    """Vectorised version of :func:`sample_offspring` (same laws)."""
    k = spec.kind
    if k == "semiline":
        return np.ones(size, dtype=np.int64)
    if k == "det":
        return np.full(size, int(spec.params[0]), dtype=np.int64)
    if k == "bin":
        return rng.binomial(spec.params[0], spec.params[1], size=size).astype(np.int64)
    if k == "pois":
        return rng.poisson(spec.params[0], size=size).astype(np.int64)
    if k == "geom":
        return rng.geometric(spec.params[0], size=size).astype(np.int64) - 1
    cdf = _pmf_cdf(spec.params)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(idx, len(cdf) - 1).astype(np.int64)


def _pgf(spec: OffspringSpec, s: float) -> float:
    k = spec.kind
    if k in ("semiline",):
        return s
    if k == "det":
        return s ** spec.params[0]
    if k == "bin":
        n, p = spec.params
        return (1.0 - p + p * s) ** n
    if k == "pois":
        return math.exp(spec.params[0] * (s - 1.0))
    if k == "geom":
        p = spec.params[0]
        return p / (1.0 - (1.0 - p) * s)
    acc = 0.0
    for coef in reversed(spec.params):
        acc = acc * s + coef
    return acc


def extinction_probability(spec: OffspringSpec, tol: float = 1e-13) -> float:
    """Smallest fixed point of the generating function on [0, 1].

    Returns 1.0 exactly for critical and subcritical laws.  The
    supercritical value is found by monotone fixed-point iteration from
    0, which converges because the generating function is increasing and
    convex.
    """
    if offspring_mean(spec) <= 1.0:
        return 1.0
    s = 0.0
    for _ in range(100_000):
        s_next = _pgf(spec, s)
        if abs(s_next - s) <= tol:
            return s_next
        s = s_next
    return s
