"""Event-driven simulator for the growth-with-recovery process.

A run starts with the root occupied at time zero.  Every occupied
vertex draws an offspring count, one Exp(1) passage time per child
edge, and one Exp(gamma) recovery duration, in that order; a child
activates when its edge passage completes.  A vertex is red from its
activation until its recovery elapses, black afterwards, and black
vertices keep transmitting, so occupation is monotone while colour is
not.

Two equivalent realization paths exist.  The reference path is a
priority queue over pending edge completions (any offspring law); the
semi-line path is vectorised because its activation order is forced,
and it reproduces the heap path byte for byte on the same seed: the
per-vertex draw order [passage, recovery] makes the stream one flat
block of exponentials.

An :class:`EventLog` is the complete record of a run and every
observable below (snapshot, red runs, red clusters, boundary counts,
jump chain) is a pure function of the log, so replications can be
archived and revisited without re-simulation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from fpp_recovery import _kernels
from fpp_recovery.offspring import (
    OffspringSpec, OffspringError, parse_offspring, sample_offspring,
)

DEFAULT_VERTEX_CAP = 10_000_000


class ValidationError(ValueError):
    """Invalid run configuration."""


class OutOfHorizonError(ValueError):
    """A query time or index lies beyond what the log observed."""


class VertexCapError(RuntimeError):
    """The run hit its vertex budget before its stop rule."""

    def __init__(self, message, n_activated, time_reached):
        super().__init__(message)
        self.n_activated = n_activated
        self.time_reached = time_reached


class VertexRecord(NamedTuple):
    id: int
    parent: int     # -1 for the root
    depth: int


class JumpChain(NamedTuple):
    sigma: np.ndarray   # event times, sigma[0] = 0
    w: np.ndarray       # red-vertex count right after each event


class ReachingTimes(NamedTuple):
    n: np.ndarray       # 1, 2, ..., #vertices
    theta: np.ndarray   # activation time of the n-th vertex


@dataclass(frozen=True)
class RunConfig:
    """Immutable description of one replication.

    Exactly one stop rule must be set: ``t_max`` observes the process on
    [0, t_max], ``n_max`` stops after that many activations.  The vertex
    cap is a resource guard, not a stop rule: hitting it raises.
    """

    graph: Union[OffspringSpec, str]
    gamma: float
    t_max: Optional[float] = None
    n_max: Optional[int] = None
    vertex_cap: int = DEFAULT_VERTEX_CAP
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.graph, str):
            object.__setattr__(self, "graph", parse_offspring(self.graph))
        elif not isinstance(self.graph, OffspringSpec):
            raise ValidationError("graph must be an OffspringSpec or grammar text")
        if not self.gamma > 0.0:
            raise ValidationError("recovery rate must be positive")
        if (self.t_max is None) == (self.n_max is None):
            raise ValidationError("set exactly one of t_max and n_max")
        if self.t_max is not None and not self.t_max >= 0.0:
            raise ValidationError("t_max must be >= 0")
        if self.n_max is not None and (self.n_max != int(self.n_max)
                                       or self.n_max < 1):
            raise ValidationError("n_max must be an integer >= 1")
        if self.vertex_cap < 1:
            raise ValidationError("vertex_cap must be >= 1")
        if self.n_max is not None and self.n_max > self.vertex_cap:
            raise ValidationError("n_max exceeds vertex_cap")
        if self.seed != int(self.seed) or self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


@dataclass(frozen=True, eq=False)
class EventLog:
    """Complete record of one run, in activation order.

    Arrays are parallel over vertex ids 0..n-1 with the root first;
    ``offspring`` holds the drawn child counts (children may activate
    after the horizon, so the sum can exceed n - 1).  ``final_time`` is
    the end of the observed window: t_max for time-stopped runs, the
    last activation instant for count-stopped runs, and +inf for runs
    that went extinct, whose logs are complete for every t.
    """

    graph: OffspringSpec
    gamma: float
    parent: np.ndarray
    depth: np.ndarray
    tau: np.ndarray
    recovery: np.ndarray
    offspring: np.ndarray
    extinct: bool
    final_time: float
    stop_rule: str
    stop_value: float

    @property
    def n(self) -> int:
        return int(self.tau.size)

    @property
    def vertices(self):
        """Iterate (VertexRecord, activation time, recovery duration)."""
        for i in range(self.n):
            yield (VertexRecord(i, int(self.parent[i]), int(self.depth[i])),
                   float(self.tau[i]), float(self.recovery[i]))

    @classmethod
    def from_arrays(cls, graph, gamma, parent, tau, recovery,
                    offspring=None, extinct=True, final_time=math.inf,
                    stop_rule="t_max", stop_value=math.inf):
        """Build and validate a log from raw arrays (tests, file replay).

        Ordering requirements match the simulator's: root first, parents
        precede children, activation times nondecreasing from zero.
        """
        if isinstance(graph, str):
            graph = parse_offspring(graph)
        parent = np.asarray(parent, dtype=np.int64)
        tau = np.asarray(tau, dtype=np.float64)
        recovery = np.asarray(recovery, dtype=np.float64)
        n = parent.size
        if n == 0 or tau.size != n or recovery.size != n:
            raise ValidationError("parent, tau, recovery must be equal nonzero length")
        if parent[0] != -1 or tau[0] != 0.0:
            raise ValidationError("root must come first with parent -1, tau 0")
        if n > 1 and (parent[1:] < 0).any():
            raise ValidationError("only the root may have parent -1")
        if (parent[1:] >= np.arange(1, n)).any():
            raise ValidationError("parents must precede children")
        if (np.diff(tau) < 0).any():
            raise ValidationError("activation times must be nondecreasing")
        if not (recovery > 0).all():
            raise ValidationError("recovery durations must be positive")
        if tau.size and tau[-1] > final_time:
            raise ValidationError("activations past final_time")
        depth = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            depth[i] = depth[parent[i]] + 1
        if offspring is None:
            offspring = np.bincount(parent[1:], minlength=n).astype(np.int64) \
                if n > 1 else np.zeros(1, dtype=np.int64)
        else:
            offspring = np.asarray(offspring, dtype=np.int64)
            if offspring.size != n or (offspring < 0).any():
                raise ValidationError("offspring must be n nonnegative counts")
        return cls(graph=graph, gamma=float(gamma), parent=parent, depth=depth,
                   tau=tau, recovery=recovery, offspring=offspring,
                   extinct=bool(extinct), final_time=float(final_time),
                   stop_rule=stop_rule, stop_value=float(stop_value))


@dataclass(frozen=True, eq=False)
class Snapshot:
    """State of a run at one query time.

    ``occupied`` and ``red`` are vertex-id arrays; ``boundary_size``
    counts the external boundary (pending child edges) of the occupied
    set; ``h`` is the longest root-away all-red chain in vertices and
    ``m_cluster`` the largest red connected cluster.
    """

    t: float
    occupied: np.ndarray
    red: np.ndarray
    red_mask: np.ndarray
    parent: np.ndarray
    boundary_size: int
    h: int
    m_cluster: int


# ---------------------------------------------------------------------------
# realization paths


def _run_heap(graph, gamma, rng, t_max, n_max, vertex_cap):
    """Reference realization: a priority queue of pending edge
    completions, keyed by (completion time, enqueue serial) so equal
    times resolve deterministically in assignment order."""
    parents = [-1]
    depths = [0]
    taus = [0.0]
    recs = []
    offs = []
    heap = []
    serial = 0

    def activate(vid, t, d):
        nonlocal serial
        b = sample_offspring(graph, rng)
        passages = rng.standard_exponential(b)
        for j in range(b):
            heapq.heappush(heap, (t + passages[j], serial, vid, d + 1))
            serial += 1
        offs.append(b)
        # divide, not multiply by a reciprocal: the vectorised semi-line
        # path divides, and the two must agree byte for byte
        recs.append(rng.standard_exponential() / gamma)

    activate(0, 0.0, 0)
    n = 1
    extinct = False
    final_time = None
    while True:
        if not heap:
            extinct = True
            final_time = math.inf
            break
        if n_max is not None and n >= n_max:
            final_time = taus[-1]
            break
        cand_t, _, pv, d = heap[0]
        if t_max is not None and cand_t > t_max:
            final_time = t_max
            break
        if n >= vertex_cap:
            raise VertexCapError(
                "vertex cap %d hit at t=%.6g before the stop rule"
                % (vertex_cap, cand_t), n_activated=n, time_reached=cand_t)
        heapq.heappop(heap)
        parents.append(pv)
        depths.append(d)
        taus.append(cand_t)
        activate(n, cand_t, d)
        n += 1
    return (np.asarray(parents, dtype=np.int64),
            np.asarray(depths, dtype=np.int64),
            np.asarray(taus, dtype=np.float64),
            np.asarray(recs, dtype=np.float64),
            np.asarray(offs, dtype=np.int64),
            extinct, final_time)


def semiline_draws(rng, gamma, n):
    """Activation times and recovery durations for the first n vertices
    of a semi-line run: one flat block of 2n exponentials, even slots
    the passages, odd slots the recoveries.  Shared by the vectorised
    run path and the replicated experiments so the draw contract has a
    single home."""
    draws = rng.standard_exponential(2 * n)
    tau = np.empty(n, dtype=np.float64)
    tau[0] = 0.0
    np.cumsum(draws[0:2 * (n - 1):2], out=tau[1:])
    rec = draws[1::2] / gamma
    return tau, rec


def _run_semiline(gamma, rng, t_max, n_max, vertex_cap):
    if n_max is not None:
        tau, rec = semiline_draws(rng, gamma, n_max)
        return tau, rec, float(tau[-1])
    # time-stopped: grow in blocks sized for E[#activations] = t_max + 1.
    # Over-drawing past the horizon leaves the stream position different
    # from the heap path's, but nothing after the log escapes, and the
    # log fields agree byte for byte.
    chunk = max(64, int(1.5 * t_max) + 64)
    taus = [np.zeros(1)]
    recs = []
    base = 0.0
    n = 1
    while True:
        draws = rng.standard_exponential(2 * chunk)
        cum = base + np.cumsum(draws[0::2])
        recs.append(draws[1::2] / gamma)
        accepted = int(np.searchsorted(cum, t_max, side="right"))
        if n + accepted > vertex_cap:
            over = vertex_cap - n  # index of the first activation past cap
            over_t = float(cum[over]) if over < accepted else float(t_max)
            raise VertexCapError(
                "vertex cap %d hit at t=%.6g before t_max=%.6g"
                % (vertex_cap, over_t, t_max),
                n_activated=vertex_cap, time_reached=over_t)
        taus.append(cum[:accepted])
        n += accepted
        if accepted < chunk:
            break
        base = float(cum[-1])
    tau = np.concatenate(taus)
    rec = np.concatenate(recs)[:tau.size]
    return tau, rec, float(t_max)


def run_replication(config: RunConfig) -> EventLog:
    """Simulate one run; a pure function of the config (seed included).

    The semi-line uses the vectorised path, every other offspring law
    the reference heap; both consume the generator identically per
    activation, which the test suite pins byte for byte.
    """
    if not isinstance(config, RunConfig):
        raise ValidationError("expected a RunConfig")
    rng = np.random.default_rng(config.seed)
    stop_rule = "t_max" if config.t_max is not None else "n_max"
    stop_value = config.t_max if config.t_max is not None else config.n_max
    if config.graph.kind == "semiline":
        tau, rec, final_time = _run_semiline(
            config.gamma, rng, config.t_max, config.n_max, config.vertex_cap)
        n = tau.size
        ids = np.arange(n, dtype=np.int64)
        return EventLog(graph=config.graph, gamma=config.gamma,
                        parent=ids - 1, depth=ids, tau=tau, recovery=rec,
                        offspring=np.ones(n, dtype=np.int64),
                        extinct=False, final_time=final_time,
                        stop_rule=stop_rule, stop_value=float(stop_value))
    parent, depth, tau, rec, offs, extinct, final_time = _run_heap(
        config.graph, config.gamma, rng, config.t_max, config.n_max,
        config.vertex_cap)
    return EventLog(graph=config.graph, gamma=config.gamma, parent=parent,
                    depth=depth, tau=tau, recovery=rec, offspring=offs,
                    extinct=extinct, final_time=final_time,
                    stop_rule=stop_rule, stop_value=float(stop_value))


# ---------------------------------------------------------------------------
# observables


def snapshot(log: EventLog, t: float) -> Snapshot:
    """State of the process at time t.

    Valid for any t <= final_time; negative t gives the empty state
    (nothing is occupied before the root activates).  Querying past the
    observed window raises :class:`OutOfHorizonError` because the log
    cannot know which activations it missed.
    """
    t = float(t)
    if t > log.final_time:
        raise OutOfHorizonError(
            "t=%.6g lies beyond the observed window [0, %.6g]"
            % (t, log.final_time))
    if t < 0.0:
        empty_i = np.empty(0, dtype=np.int64)
        return Snapshot(t=t, occupied=empty_i, red=empty_i,
                        red_mask=np.empty(0, dtype=bool),
                        parent=empty_i, boundary_size=0, h=0, m_cluster=0)
    k = int(np.searchsorted(log.tau, t, side="right"))
    red_mask = (log.tau[:k] + log.recovery[:k]) > t
    parent = log.parent[:k]
    boundary = int(log.offspring[:k].sum() - (k - 1)) if k else 0
    h, m = _kernels.red_chain_stats(parent, red_mask)
    return Snapshot(t=t, occupied=np.arange(k, dtype=np.int64),
                    red=np.flatnonzero(red_mask).astype(np.int64),
                    red_mask=red_mask, parent=parent,
                    boundary_size=boundary, h=int(h), m_cluster=int(m))


def longest_red_path(snap: Snapshot) -> int:
    """Vertex count of the longest root-away chain of red vertices."""
    h, _ = _kernels.red_chain_stats(snap.parent, snap.red_mask)
    return int(h)


def largest_red_cluster(snap: Snapshot) -> int:
    """Vertex count of the largest connected red cluster."""
    _, m = _kernels.red_chain_stats(snap.parent, snap.red_mask)
    return int(m)


def _require_semiline(log: EventLog, what: str):
    if log.graph.kind != "semiline":
        raise ValidationError("%s is defined on the semi-line only" % what)


def tail_cluster_size(log: EventLog, n: int) -> int:
    """Red run ending at the n-th vertex, observed at its activation:
    the count of consecutive red vertices looking back from vertex n-1
    at time tau_n (the newest vertex is always red, so the value is at
    least 1)."""
    _require_semiline(log, "tail_cluster_size")
    if n != int(n) or n < 1:
        raise ValidationError("n must be an integer >= 1")
    n = int(n)
    if n > log.n:
        raise OutOfHorizonError("log holds %d vertices, asked for %d" % (log.n, n))
    tn = log.tau[n - 1]
    alive = (log.tau[:n] + log.recovery[:n]) > tn
    rev = alive[::-1]
    if rev.all():
        return n
    return int(np.argmin(rev))


def jump_chain(log: EventLog) -> JumpChain:
    """Embedded red-count chain on the semi-line.

    Events are activations (+1) and recoveries (-1, kept only when they
    land inside the observed window); simultaneous times resolve
    activations first.  The first entry is always (0, 1): the root
    activating alone."""
    _require_semiline(log, "jump_chain")
    rec_times = log.tau + log.recovery
    keep = rec_times < log.final_time
    times = np.concatenate([log.tau, rec_times[keep]])
    delta = np.concatenate([np.ones(log.n, dtype=np.int64),
                            -np.ones(int(keep.sum()), dtype=np.int64)])
    order = np.argsort(times, kind="stable")
    sigma = times[order]
    w = np.cumsum(delta[order])
    return JumpChain(sigma=sigma, w=w)


def reaching_times(log: EventLog) -> ReachingTimes:
    """(n, theta_n): the time the process first holds n vertices."""
    return ReachingTimes(n=np.arange(1, log.n + 1, dtype=np.int64),
                         theta=log.tau.copy())


# ---------------------------------------------------------------------------
# plain-text export


def _fmt(x) -> str:
    """Shortest decimal that round-trips the float."""
    return repr(float(x))


def event_log_csv(log: EventLog) -> str:
    """One vertex per row: id,parent,depth,tau,recovery_duration."""
    lines = ["id,parent,depth,tau,recovery_duration"]
    for i in range(log.n):
        lines.append("%d,%d,%d,%s,%s" % (
            i, log.parent[i], log.depth[i], _fmt(log.tau[i]),
            _fmt(log.recovery[i])))
    return "\n".join(lines) + "\n"


def snapshot_csv(snaps) -> str:
    """One snapshot per row: t,occupied,red,boundary,H,M (counts)."""
    lines = ["t,occupied,red,boundary,H,M"]
    for s in snaps:
        lines.append("%s,%d,%d,%d,%d,%d" % (
            _fmt(s.t), s.occupied.size, s.red.size, s.boundary_size,
            s.h, s.m_cluster))
    return "\n".join(lines) + "\n"
