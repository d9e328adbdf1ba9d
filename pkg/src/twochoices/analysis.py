"""Exact oracles and statistical estimators for the dynamics.

The one-round oracle computes conditional expectations of color counts
in closed form from exact neighbor counts, so Monte-Carlo runs and the
printed drift bound can both be checked against it.  The Poisson
machinery (exact Poisson-binomial law, Poisson tails, total-variation
distance) supports the minority-size approximation used to certify
metastability, and the Gaussian tail supports the random-initialization
checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .dynamics import BLUE, RED, RngContext, biases
from .graph import ClusteredRegularGraph
from .rng import base_key, derive_seed, fold_round

Z95 = 1.959963984540054


# ---------------------------------------------------------------------------
# one-round expectation oracle
# ---------------------------------------------------------------------------


def _color_neighbor_counts(
    g: ClusteredRegularGraph, colors: np.ndarray, community: int, color: int
) -> np.ndarray:
    """Exact count of `color` neighbors (in the full graph) for every node
    of the community, in node-id order."""
    rows = g.adjacency[g.community_slice(community)]
    return (colors[rows] == color).sum(axis=1)


def exact_expected_color_count(
    g: ClusteredRegularGraph, colors: np.ndarray, community: int, color: int
) -> float:
    """E[#nodes of `color` in the community next round | current colors].

    A node of the other color joins iff both its draws land on `color`
    neighbors; a node already of `color` leaves iff both draws land on
    opposite-color neighbors.  Exact, O(sum of degrees).
    """
    counts = _color_neighbor_counts(g, colors, community, color)
    own = colors[g.community_slice(community)] == color
    d = float(g.d)
    join = ((counts[~own] / d) ** 2).sum()
    stay = (1.0 - ((g.d - counts[own]) / d) ** 2).sum()
    return float(join + stay)


def minority_color(g: ClusteredRegularGraph, colors: np.ndarray, community: int) -> int:
    """The community's minority color by bias sign; blue on an exact tie."""
    s = biases(g, colors)[community - 1]
    return BLUE if s >= 0 else RED


def exact_expected_minority(
    g: ClusteredRegularGraph, colors: np.ndarray, community: int
) -> float:
    """Exact conditional expectation of the tracked class size in one
    community: the blue class in community 1, the red class in
    community 2 (the pairing of the drift bound's two statements).
    Use :func:`exact_expected_color_count` for any other pairing."""
    color = BLUE if community == 1 else RED
    return exact_expected_color_count(g, colors, community, color)


def expected_minority_bound(
    n: int, minority_count: int, other_count: int, c1: float, c2: float
) -> float:
    """Closed-form upper bound on the expected next-round size of a color
    class inside one community.

    `minority_count` is the class size in the community under study,
    `other_count` the same color's size in the other community, and
    (c1, c2) the measured cut/expansion constants.  Undefined when the
    class is empty (the factored form divides by it).
    """
    if minority_count < 1:
        raise ValueError("bound requires at least one node of the color class")
    if other_count < 0:
        raise ValueError("negative class size")
    s1 = n - 2 * minority_count
    inv_sqrt_n = 1.0 / math.sqrt(n)
    drift = 1.0 - s1 / (2.0 * n) + c2 * c2 * inv_sqrt_n
    inner = (
        0.5
        - s1 / (2.0 * n)
        + c2 * c2 * inv_sqrt_n
        + c1 * c1 * other_count / (n * minority_count)
    )
    cross = 2.0 * c1 * inv_sqrt_n * math.sqrt(other_count / minority_count * inner)
    return minority_count * (drift + cross)


# ---------------------------------------------------------------------------
# minority flip profile
# ---------------------------------------------------------------------------


@dataclass
class MinorityFlipProfile:
    """Per-node probabilities of supporting the minority color next round.

    `p[k]` addresses the k-th node of the community (node-id order);
    `sum_p` is the Poisson rate approximating the next minority count
    and `sum_p_sq` controls the approximation's total-variation error.
    """

    p: np.ndarray
    sum_p: float
    sum_p_sq: float


def minority_flip_profile(
    g: ClusteredRegularGraph,
    colors: np.ndarray,
    community: int,
    color: Optional[int] = None,
) -> MinorityFlipProfile:
    """Exact per-node probability of holding the minority color next round.

    With `color=None` the minority is taken by bias sign and an exact
    tie is rejected; passing an explicit color evaluates that color's
    profile unconditionally.
    """
    if color is None:
        s = biases(g, colors)[community - 1]
        if s == 0:
            raise ValueError("community is tied; specify the color explicitly")
        color = BLUE if s > 0 else RED
    counts = _color_neighbor_counts(g, colors, community, color)
    own = colors[g.community_slice(community)] == color
    d = float(g.d)
    p = np.where(own, 1.0 - ((g.d - counts) / d) ** 2, (counts / d) ** 2)
    return MinorityFlipProfile(
        p=p, sum_p=float(p.sum()), sum_p_sq=float((p * p).sum())
    )


# ---------------------------------------------------------------------------
# Poisson machinery
# ---------------------------------------------------------------------------


def poisson_binomial_pmf(p: Sequence[float]) -> np.ndarray:
    """Exact law of a sum of independent Bernoulli(p_i) variables.

    Standard O(k^2) convolution recurrence; masses sum to 1 within 1e-12.
    """
    probs = np.asarray(p, dtype=float)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    pmf = np.ones(1)
    for q in probs:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] = pmf * (1.0 - q)
        nxt[1:] += pmf * q
        pmf = nxt
    total = pmf.sum()
    if abs(total - 1.0) > 1e-12:
        raise ArithmeticError(f"probability mass drifted to {total!r}")
    return pmf


def poisson_pmf_array(lam: float, kmax: int) -> np.ndarray:
    """Poisson(lam) masses for k = 0..kmax via the stable ratio recurrence."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    pmf = np.empty(kmax + 1)
    pmf[0] = math.exp(-lam)
    for k in range(1, kmax + 1):
        pmf[k] = pmf[k - 1] * lam / k
    return pmf


def poisson_tail(lam: float, t: float) -> float:
    """P[X > t] for X ~ Poisson(lam): one minus the cdf at floor(t)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if t < 0:
        return 1.0
    kmax = int(math.floor(t))
    cdf = math.fsum(poisson_pmf_array(lam, kmax).tolist())
    return max(0.0, 1.0 - cdf)


def poisson_l1_distance(pmf: np.ndarray, lam: float) -> float:
    """L1 distance between a finitely supported law and Poisson(lam),
    summed over the support plus the Poisson tail beyond it."""
    kmax = pmf.size - 1
    pois = poisson_pmf_array(lam, kmax)
    return float(np.abs(pmf - pois).sum() + poisson_tail(lam, kmax))


def poisson_total_variation(pmf: np.ndarray, lam: float) -> float:
    """Total-variation distance (half the L1 distance)."""
    return 0.5 * poisson_l1_distance(pmf, lam)


def normal_upper_tail(x: float) -> float:
    """Standard normal upper tail via the complementary error function
    (absolute error well below 1e-7)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# event estimation
# ---------------------------------------------------------------------------


@dataclass
class EventEstimate:
    trials: int
    successes: int
    estimate: float
    wilson_low: float
    wilson_high: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.wilson_high - self.wilson_low)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> Tuple[float, float]:
    """Two-sided Wilson score interval; well behaved near 0 and 1."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = phat + z * z / (2 * trials)
    spread = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials))
    return ((center - spread) / denom, (center + spread) / denom)


def make_event_estimate(successes: int, trials: int) -> EventEstimate:
    low, high = wilson_interval(successes, trials)
    return EventEstimate(
        trials=trials,
        successes=successes,
        estimate=successes / trials,
        wilson_low=low,
        wilson_high=high,
    )


def estimate_event_probability(
    event: Callable[[int], bool],
    trials: int,
    seed: int,
    workers: Optional[int] = None,
) -> EventEstimate:
    """Monte-Carlo frequency of `event` over independent derived seeds.

    `event` receives one derived seed per trial and must be a pure
    function of it, so the aggregation (a plain sum) is order
    independent and worker count cannot change the estimate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = [derive_seed(seed, i) for i in range(trials)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            successes = sum(bool(x) for x in pool.map(event, seeds, chunksize=64))
    else:
        successes = sum(bool(event(s)) for s in seeds)
    return make_event_estimate(successes, trials)


# ---------------------------------------------------------------------------
# metastability window
# ---------------------------------------------------------------------------


@dataclass
class MetastabilityWindow:
    max_minority: Tuple[int, int]
    first_violation: Optional[int]   # round index, None if the cap held
    first_sign_flip: Optional[int]
    threshold: int
    rounds_requested: int
    rounds_executed: int

    @property
    def ok(self) -> bool:
        return self.first_violation is None and self.first_sign_flip is None


def metastability_window(
    g: ClusteredRegularGraph,
    c0: np.ndarray,
    rounds: int,
    kappa: float,
    ctx: RngContext,
) -> MetastabilityWindow:
    """Watch per-community minority counts against ceil(kappa ln n / ln ln n).

    Runs the two-choices dynamics for `rounds` rounds (stopping early if
    the cap is crossed or a bias changes sign) and reports the maxima,
    the first crossing, and the first sign flip.  The initial
    configuration itself is checked as round 0.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    threshold = math.ceil(kappa * math.log(g.n) / math.log(math.log(g.n)))
    colors = np.array(c0, dtype=np.uint8, copy=True)
    max1, max2, violation, flip, executed = _kernels.watch_rounds(
        g.adjacency,
        colors,
        np.uint64(base_key(ctx.seed, ctx.run)),
        ctx.round_index,
        rounds,
        threshold,
    )
    return MetastabilityWindow(
        max_minority=(int(max1), int(max2)),
        first_violation=None if violation < 0 else int(violation),
        first_sign_flip=None if flip < 0 else int(flip),
        threshold=threshold,
        rounds_requested=rounds,
        rounds_executed=int(executed),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo one-step replay (for oracle consistency checks)
# ---------------------------------------------------------------------------


def one_step_color_count_samples(
    g: ClusteredRegularGraph,
    colors: np.ndarray,
    community: int,
    color: int,
    replays: int,
    seed: int,
) -> np.ndarray:
    """Simulate one synchronous round `replays` times (independent run
    ids) and return the community's count of `color` after each replay."""
    keys = np.array(
        [fold_round(base_key(seed, r), 0) for r in range(replays)], dtype=np.uint64
    )
    sl = g.community_slice(community)
    return _kernels.one_step_color_counts(
        g.adjacency, np.ascontiguousarray(colors, dtype=np.uint8), keys, sl.start, sl.stop, color
    )
