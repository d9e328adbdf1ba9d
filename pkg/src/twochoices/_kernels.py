"""Numba kernels for the round loops.

These mirror the vectorized single-step implementation in ``dynamics``
draw for draw (same key derivation, same index map); the equivalence is
asserted in the test suite.  All kernels read the old configuration and
write a fresh one each round, so results are independent of any intra-
round evaluation order.
"""

import numpy as np
from numba import njit

from . import rng as _rng

_U = np.uint64
_M1 = _U(_rng.MIX_M1)
_M2 = _U(_rng.MIX_M2)
_GAMMA = _U(_rng.GAMMA)
_ROUND = _U(_rng.ROUND_OFFSET)
_DRAW = _U(_rng.DRAW_STRIDE)

RULE_TWO_CHOICES = 0
RULE_VOTER = 1


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U(30))) * _M1
    z = (z ^ (z >> _U(27))) * _M2
    return z ^ (z >> _U(31))


@njit(cache=True, inline="always")
def _fold_round(base, t):
    return _mix64(base ^ (_U(t) * _GAMMA + _ROUND))


@njit(cache=True, inline="always")
def _draw_index(key, u, k, d):
    z = _mix64(key + _U(u) * _GAMMA + _U(k) * _DRAW)
    return int(((z >> _U(32)) * _U(d)) >> _U(32))


@njit(cache=True)
def _round_update(adj, old, new, key, rule_id):
    """One synchronous round; returns (red count in V1, red count in V2)."""
    two_n, d = adj.shape
    n = two_n // 2
    red1 = 0
    red2 = 0
    for u in range(two_n):
        if rule_id == RULE_TWO_CHOICES:
            v = adj[u, _draw_index(key, u, 0, d)]
            w = adj[u, _draw_index(key, u, 1, d)]
            cv = old[v]
            if cv == old[w]:
                c = cv
            else:
                c = old[u]
        else:
            c = old[adj[u, _draw_index(key, u, 0, d)]]
        new[u] = c
        if u < n:
            red1 += c
        else:
            red2 += c
    return red1, red2


@njit(cache=True)
def run_rounds(adj, colors, base, start_round, max_rounds, rule_id,
               stop_mono, stop_clust, clust_thr, records):
    """Iterate rounds with stop criteria; `colors` ends as the final state.

    `records` is an int64 (max_rounds+1, 4) array receiving
    (s1, s2, minority1, minority2) per recorded round, or a (0, 4) array
    to skip recording.  Stop criteria are evaluated on the current
    configuration before each step.  Returns the number of rounds run.
    """
    two_n = adj.shape[0]
    n = two_n // 2
    old = colors.copy()
    new = np.empty_like(colors)
    red1 = 0
    red2 = 0
    for u in range(n):
        red1 += old[u]
    for u in range(n, two_n):
        red2 += old[u]
    rec = records.shape[0] > 0
    if rec:
        records[0, 0] = 2 * red1 - n
        records[0, 1] = 2 * red2 - n
        records[0, 2] = min(red1, n - red1)
        records[0, 3] = min(red2, n - red2)
    executed = 0
    for t in range(max_rounds):
        s1 = 2 * red1 - n
        s2 = 2 * red2 - n
        if stop_mono and ((red1 == 0 and red2 == 0) or (red1 == n and red2 == n)):
            break
        if stop_clust and s1 * s2 < 0 and abs(s1) >= clust_thr and abs(s2) >= clust_thr:
            break
        key = _fold_round(base, start_round + t)
        red1, red2 = _round_update(adj, old, new, key, rule_id)
        tmp = old
        old = new
        new = tmp
        executed = t + 1
        if rec:
            records[executed, 0] = 2 * red1 - n
            records[executed, 1] = 2 * red2 - n
            records[executed, 2] = min(red1, n - red1)
            records[executed, 3] = min(red2, n - red2)
    colors[:] = old
    return executed


@njit(cache=True)
def watch_rounds(adj, colors, base, start_round, rounds, minority_cap):
    """Track per-community minority counts against a cap over many rounds.

    Returns (max_min1, max_min2, first_violation, first_sign_flip,
    executed) where round indices are -1 when the event never happened.
    Stops early at the first violation or sign flip.  Round 0 (the
    initial configuration) is checked too.
    """
    two_n = adj.shape[0]
    n = two_n // 2
    old = colors.copy()
    new = np.empty_like(colors)
    red1 = 0
    red2 = 0
    for u in range(n):
        red1 += old[u]
    for u in range(n, two_n):
        red2 += old[u]
    s1 = 2 * red1 - n
    s2 = 2 * red2 - n
    sign1 = 0 if s1 == 0 else (1 if s1 > 0 else -1)
    sign2 = 0 if s2 == 0 else (1 if s2 > 0 else -1)
    m1 = min(red1, n - red1)
    m2 = min(red2, n - red2)
    max1 = m1
    max2 = m2
    violation = -1
    flip = -1
    if m1 > minority_cap or m2 > minority_cap:
        violation = 0
    executed = 0
    if violation < 0:
        for t in range(rounds):
            key = _fold_round(base, start_round + t)
            red1, red2 = _round_update(adj, old, new, key, RULE_TWO_CHOICES)
            tmp = old
            old = new
            new = tmp
            executed = t + 1
            s1 = 2 * red1 - n
            s2 = 2 * red2 - n
            m1 = min(red1, n - red1)
            m2 = min(red2, n - red2)
            if m1 > max1:
                max1 = m1
            if m2 > max2:
                max2 = m2
            if flip < 0 and (s1 * sign1 < 0 or s2 * sign2 < 0):
                flip = executed
            if m1 > minority_cap or m2 > minority_cap:
                violation = executed
            if violation >= 0 or flip >= 0:
                break
    colors[:] = old
    return max1, max2, violation, flip, executed


@njit(cache=True)
def convergence_rounds(adj, colors, base, start_round, max_rounds, target):
    """Run until both |s_i| >= target with the initial sign, or max_rounds.

    Returns (tau1, tau2, first_sign_flip, executed); tau_i is the first
    round index at which community i met the target (-1 if never).
    """
    two_n = adj.shape[0]
    n = two_n // 2
    old = colors.copy()
    new = np.empty_like(colors)
    red1 = 0
    red2 = 0
    for u in range(n):
        red1 += old[u]
    for u in range(n, two_n):
        red2 += old[u]
    s1 = 2 * red1 - n
    s2 = 2 * red2 - n
    sign1 = 0 if s1 == 0 else (1 if s1 > 0 else -1)
    sign2 = 0 if s2 == 0 else (1 if s2 > 0 else -1)
    tau1 = 0 if (abs(s1) >= target and sign1 != 0) else -1
    tau2 = 0 if (abs(s2) >= target and sign2 != 0) else -1
    flip = -1
    executed = 0
    for t in range(max_rounds):
        if tau1 >= 0 and tau2 >= 0:
            break
        key = _fold_round(base, start_round + t)
        red1, red2 = _round_update(adj, old, new, key, RULE_TWO_CHOICES)
        tmp = old
        old = new
        new = tmp
        executed = t + 1
        s1 = 2 * red1 - n
        s2 = 2 * red2 - n
        if flip < 0 and (s1 * sign1 < 0 or s2 * sign2 < 0):
            flip = executed
            break
        if tau1 < 0 and s1 * sign1 >= target:
            tau1 = executed
        if tau2 < 0 and s2 * sign2 >= target:
            tau2 = executed
    colors[:] = old
    return tau1, tau2, flip, executed


@njit(cache=True)
def one_step_color_counts(adj, colors, keys, lo, hi, color):
    """Count nodes in [lo, hi) that hold `color` after one round, for each
    round key in `keys` (independent single-step replays)."""
    d = adj.shape[1]
    out = np.empty(keys.shape[0], dtype=np.int64)
    for r in range(keys.shape[0]):
        key = keys[r]
        cnt = 0
        for u in range(lo, hi):
            v = adj[u, _draw_index(key, u, 0, d)]
            w = adj[u, _draw_index(key, u, 1, d)]
            cv = colors[v]
            if cv == colors[w]:
                c = cv
            else:
                c = colors[u]
            if c == color:
                cnt += 1
        out[r] = cnt
    return out
