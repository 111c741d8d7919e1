"""Compiled hot loops for the replicated experiments.

The Monte Carlo studies push event counts into the billions, far past
what the reference heap engine sustains, so the inner loops live here
as numba kernels built around a race representation of the growth: with
``k`` pending parent slots the next activation arrives after an
Exp(k) wait and lands on a uniformly chosen slot.  That joint law is
exactly the one induced by independent Exp(1) passage times per edge
(memorylessness), which the distribution tests pin against the heap
engine.

Random numbers come from an inlined xoshiro256++ generator seeded
through splitmix64; numpy's Generator calls cost too much inside numba
loops.  The 4-word uint64 state array is owned by the kernel call.
All integer arithmetic below is kept in uint64 on purpose: mixing
signed ints into these expressions makes numba promote to float64.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64, int64, float64

# 2^-53; uniform doubles are (r >> 11 + 1) * 2^-53 in (0, 1], never 0,
# so -log(u) below is always finite.
_INV53 = 1.0 / 9007199254740992.0

STATUS_STOPPED = 0
STATUS_EXTINCT = 1
STATUS_RESOURCE = 2


@njit(cache=True, inline="always")
def _rotl(x, k):
    return uint64((x << k) | (x >> (uint64(64) - k)))


@njit(cache=True)
def seed_state(seed):
    """Expand a 64-bit seed into xoshiro256++ state via splitmix64."""
    st = np.empty(4, dtype=np.uint64)
    z = uint64(seed)
    for i in range(4):
        z = z + uint64(0x9E3779B97F4A7C15)
        w = z
        w = (w ^ (w >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
        w = (w ^ (w >> uint64(27))) * uint64(0x94D049BB133111EB)
        st[i] = w ^ (w >> uint64(31))
    if st[0] == uint64(0) and st[1] == uint64(0) \
            and st[2] == uint64(0) and st[3] == uint64(0):
        st[0] = uint64(0x9E3779B97F4A7C15)
    return st


@njit(cache=True, inline="always")
def _next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    r = _rotl(s0 + s3, uint64(23)) + s0
    t = s1 << uint64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, uint64(45))
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return r


@njit(cache=True, inline="always")
def _unit(st):
    # uniform on (0, 1]
    return (float64(_next_u64(st) >> uint64(11)) + 1.0) * _INV53


@njit(cache=True, inline="always")
def _expo(st):
    return -math.log(_unit(st))


@njit(cache=True, inline="always")
def _below(st, n):
    # uniform index in [0, n) by modulo; bias O(n / 2^64) is far below
    # anything observable.  A 53-bit fixed-point product would overflow
    # uint64 for n > 2^11 and silently wrap.
    return int64(_next_u64(st) % uint64(n))


@njit(cache=True, inline="always")
def _table_draw(st, cdf):
    # smallest index with cdf[index] >= u, u uniform on (0, 1]
    u = _unit(st)
    i = 0
    last = cdf.size - 1
    while i < last and cdf[i] < u:
        i += 1
    return i


KIND_DET = 0
KIND_TABLE = 1


@njit(cache=True)
def gw_run(seed, kind, ddet, cdf, gamma, t_max, n_max, cap,
           parent, depth, tau, rec, offs, slots):
    """One race-representation realization on a Galton-Watson tree.

    Writes vertices in activation order into the caller's buffers and
    returns ``(n, status, final_time)``.  ``kind`` selects the offspring
    draw: KIND_DET gives ``ddet`` children, KIND_TABLE inverts ``cdf``.
    Stop rule: ``n_max > 0`` wins, otherwise ``t_max`` (pass inf for an
    unbounded horizon).  Status codes: 0 stop rule hit, 1 extinct
    (final_time = inf, the log is complete), 2 out of buffer or cap.

    Per-activation draw order is waiting time, slot pick, offspring
    count, recovery duration; only the induced law matters, and a run
    is a pure function of ``seed`` and the arguments.
    """
    st = seed_state(seed)
    inv_gamma = 1.0 / gamma
    parent[0] = -1
    depth[0] = 0
    tau[0] = 0.0
    if kind == KIND_DET:
        b = ddet
    else:
        b = _table_draw(st, cdf)
    offs[0] = b
    rec[0] = _expo(st) * inv_gamma
    nslots = 0
    if nslots + b > slots.size:
        return 1, STATUS_RESOURCE, 0.0
    for _ in range(b):
        slots[nslots] = 0
        nslots += 1
    n = 1
    t = 0.0
    if n_max > 0 and n >= n_max:
        if nslots == 0:
            return n, STATUS_EXTINCT, np.inf
        return n, STATUS_STOPPED, 0.0
    while True:
        if nslots == 0:
            return n, STATUS_EXTINCT, np.inf
        t += _expo(st) / nslots
        if t > t_max:
            return n, STATUS_STOPPED, t_max
        if n >= cap or n >= parent.size:
            return n, STATUS_RESOURCE, t
        u = _below(st, nslots)
        pv = slots[u]
        slots[u] = slots[nslots - 1]
        nslots -= 1
        parent[n] = pv
        depth[n] = depth[pv] + 1
        tau[n] = t
        if kind == KIND_DET:
            b = ddet
        else:
            b = _table_draw(st, cdf)
        offs[n] = b
        rec[n] = _expo(st) * inv_gamma
        if nslots + b > slots.size:
            return n + 1, STATUS_RESOURCE, t
        for _ in range(b):
            slots[nslots] = n
            nslots += 1
        n += 1
        if n_max > 0 and n >= n_max:
            if nslots == 0:
                return n, STATUS_EXTINCT, np.inf
            return n, STATUS_STOPPED, t


@njit(cache=True)
def depth_front(seed, kind, ddet, cdf, horizon, cap, slots):
    """Deepest occupied level at each integer time 0..horizon.

    Colours never matter for containment, so this slimmer kernel keeps
    only pending-slot depths.  ``best[k]`` is the maximum depth among
    vertices activated at or before time k; an activation landing
    exactly on an integer time is applied before that integer is
    flushed.  Returns ``(best, n, status)``; extinction just freezes the
    front, which is the correct complete-log semantics.
    """
    st = seed_state(seed)
    best = np.zeros(horizon + 1, dtype=np.int64)
    if kind == KIND_DET:
        b = ddet
    else:
        b = _table_draw(st, cdf)
    nslots = 0
    if nslots + b > slots.size:
        return best, 1, STATUS_RESOURCE
    for _ in range(b):
        slots[nslots] = 1
        nslots += 1
    n = 1
    t = 0.0
    maxd = 0
    nextn = 1
    while True:
        if nslots == 0:
            break
        t += _expo(st) / nslots
        if t > horizon:
            break
        while nextn < t:
            best[nextn] = maxd
            nextn += 1
        if n >= cap:
            return best, n, STATUS_RESOURCE
        u = _below(st, nslots)
        d = slots[u]
        slots[u] = slots[nslots - 1]
        nslots -= 1
        if d > maxd:
            maxd = d
        if kind == KIND_DET:
            b = ddet
        else:
            b = _table_draw(st, cdf)
        if nslots + b > slots.size:
            return best, n + 1, STATUS_RESOURCE
        for _ in range(b):
            slots[nslots] = d + 1
            nslots += 1
        n += 1
    for k in range(nextn, horizon + 1):
        best[k] = maxd
    return best, n, STATUS_STOPPED


@njit(cache=True)
def red_chain_stats(parent, red):
    """Longest root-away all-red chain (vertex count) and largest red
    connected cluster among the first ``red.size`` vertices.

    Relies on parents preceding children in activation order, so one
    forward pass settles both statistics: chains extend when the parent
    is red, and red components keep the label of their oldest vertex.
    """
    k = red.size
    h = 0
    m = 0
    chain = np.zeros(k, dtype=np.int64)
    label = np.zeros(k, dtype=np.int64)
    csize = np.zeros(k, dtype=np.int64)
    for v in range(k):
        if not red[v]:
            continue
        p = parent[v]
        if p >= 0 and red[p]:
            chain[v] = chain[p] + 1
            label[v] = label[p]
        else:
            chain[v] = 1
            label[v] = v
        lab = label[v]
        csize[lab] += 1
        if chain[v] > h:
            h = chain[v]
        if csize[lab] > m:
            m = csize[lab]
    return h, m


@njit(cache=True)
def red_stats_at(parent, tau, rec, k, t):
    """red_chain_stats at query time t over the first k vertices,
    building the colour mask in place (tau must be sorted)."""
    red = np.empty(k, dtype=np.bool_)
    for v in range(k):
        red[v] = tau[v] <= t and t < tau[v] + rec[v]
    return red_chain_stats(parent[:k], red)
