"""Synchronous two-choices and voter dynamics on clustered regular graphs.

A configuration is a length-2n uint8 array, one entry per node id:
0 = blue, 1 = red.  The bias of community i is (#red - #blue) inside it.
All updates are synchronous (every node reads the previous round's
configuration) and every random draw comes from the counter-based
streams in :mod:`twochoices.rng`, keyed by (seed, run, round, node,
draw), so a trajectory is a pure function of the graph, the initial
configuration, the master seed, and the rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .graph import ClusteredRegularGraph
from .rng import base_key, fold_round, node_ids, fair_bits, uniform_indices

BLUE = 0
RED = 1

MONOCHROMATIC = "monochromatic"
ALMOST_CLUSTERED = "almost_clustered"
MIXED = "mixed"

TWO_CHOICES = "two_choices"
VOTER = "voter"
_RULE_IDS = {TWO_CHOICES: _kernels.RULE_TWO_CHOICES, VOTER: _kernels.RULE_VOTER}


class BiasPair(NamedTuple):
    s1: int
    s2: int


@dataclass(frozen=True)
class RngContext:
    """Addresses one round of one run of one seeded experiment."""

    seed: int
    run: int = 0
    round_index: int = 0

    def round_key(self) -> int:
        return fold_round(base_key(self.seed, self.run), self.round_index)

    def at_round(self, round_index: int) -> "RngContext":
        return replace(self, round_index=round_index)


@dataclass
class StopCriteria:
    max_rounds: int
    stop_on_monochromatic: bool = False
    stop_on_almost_clustered: bool = False
    kappa: float = 8.0

    def __post_init__(self):
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")


@dataclass
class Trajectory:
    """Per-round (round, s1, s2, minority1, minority2) plus the outcome."""

    records: np.ndarray  # (rounds_executed + 1, 5) int64
    terminal: str
    rounds_executed: int

    def final_biases(self) -> BiasPair:
        return BiasPair(int(self.records[-1, 1]), int(self.records[-1, 2]))

    def save_csv(self, path) -> None:
        lines = ["round,s1,s2,minority1,minority2"]
        for row in self.records:
            lines.append(",".join(str(int(x)) for x in row))
        lines[-1] += f",terminal={self.terminal}"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def random_init(g: ClusteredRegularGraph, seed: int, run: int = 0) -> np.ndarray:
    """Independent fair coin per node, drawn from the stream at round -1."""
    key = fold_round(base_key(seed, run), -1)
    return fair_bits(key, node_ids(g.num_nodes), 0)


def seeded_init(g: ClusteredRegularGraph, s1: int, s2: int) -> np.ndarray:
    """Deterministic configuration with exact biases (s1, s2).

    Community i receives (n + s_i) / 2 red nodes, lowest ids first.
    """
    n = g.n
    colors = np.zeros(g.num_nodes, dtype=np.uint8)
    for community, s in ((1, s1), (2, s2)):
        if abs(s) > n:
            raise ValueError(f"|s{community}|={abs(s)} exceeds n={n}")
        if (n - abs(s)) % 2 != 0:
            raise ValueError(f"n - |s{community}| must be even, got n={n} s={s}")
        reds = (n + s) // 2
        off = 0 if community == 1 else n
        colors[off : off + reds] = RED
    return colors


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def biases(g: ClusteredRegularGraph, colors: np.ndarray) -> BiasPair:
    n = g.n
    red1 = int(colors[:n].sum())
    red2 = int(colors[n:].sum())
    return BiasPair(2 * red1 - n, 2 * red2 - n)


def minority_counts(g: ClusteredRegularGraph, colors: np.ndarray) -> tuple:
    s1, s2 = biases(g, colors)
    return ((g.n - abs(s1)) // 2,(g.n - abs(s2)) // 2)


def outlier_budget(n: int, kappa: float) -> float:
    """The almost-clustered slack kappa * ln(n) / ln(ln(n))."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return kappa * math.log(n) / math.log(math.log(n))


def almost_clustered_threshold(n: int, kappa: float) -> int:
    """Bias magnitude required of both communities, floor(n - budget)."""
    return math.floor(n - outlier_budget(n, kappa))


def classify(bias: BiasPair, n: int, kappa: float = 8.0) -> str:
    """Label a configuration by its biases.

    monochromatic: both communities unanimous on the same color.
    almost_clustered: opposite signs and both |s_i| above the
    kappa-dependent threshold.  Everything else is mixed.
    """
    s1, s2 = bias
    if abs(s1) == n and abs(s2) == n and s1 * s2 > 0:
        return MONOCHROMATIC
    thr = almost_clustered_threshold(n, kappa)
    if s1 * s2 < 0 and abs(s1) >= thr and abs(s2) >= thr:
        return ALMOST_CLUSTERED
    return MIXED


# ---------------------------------------------------------------------------
# single steps (vectorized reference implementation)
# ---------------------------------------------------------------------------


def step_two_choices(
    g: ClusteredRegularGraph, colors: np.ndarray, ctx: RngContext
) -> np.ndarray:
    """One synchronous round: each node samples two neighbors (with
    replacement, two distinct draws) and adopts their color iff they
    agree; otherwise it keeps its own.  Returns a new array."""
    key = ctx.round_key()
    nodes = node_ids(g.num_nodes)
    rows = np.arange(g.num_nodes)
    j0 = uniform_indices(key, nodes, 0, g.d)
    j1 = uniform_indices(key, nodes, 1, g.d)
    cv = colors[g.adjacency[rows, j0]]
    cw = colors[g.adjacency[rows, j1]]
    return np.where(cv == cw, cv, colors).astype(np.uint8)


def step_voter(
    g: ClusteredRegularGraph, colors: np.ndarray, ctx: RngContext
) -> np.ndarray:
    """One synchronous round: each node copies one uniform neighbor."""
    key = ctx.round_key()
    nodes = node_ids(g.num_nodes)
    rows = np.arange(g.num_nodes)
    j0 = uniform_indices(key, nodes, 0, g.d)
    return colors[g.adjacency[rows, j0]].astype(np.uint8)


def flip_colors(colors: np.ndarray) -> np.ndarray:
    """Exchange red and blue everywhere."""
    return (1 - colors).astype(np.uint8)


# ---------------------------------------------------------------------------
# multi-round driver
# ---------------------------------------------------------------------------


def run(
    g: ClusteredRegularGraph,
    c0: np.ndarray,
    rule: str = TWO_CHOICES,
    stop: Optional[StopCriteria] = None,
    ctx: Optional[RngContext] = None,
) -> Trajectory:
    """Iterate the chosen rule until a stop criterion fires or max_rounds.

    Stop criteria are checked on the current configuration before each
    step, so a monochromatic start with stop_on_monochromatic runs zero
    rounds.  The compiled kernel used here is draw-for-draw identical
    to the single-step functions.
    """
    if rule not in _RULE_IDS:
        raise ValueError(f"unknown rule {rule!r}")
    if stop is None:
        stop = StopCriteria(max_rounds=0)
    if ctx is None:
        ctx = RngContext(seed=0)

    thr = 0
    if stop.stop_on_almost_clustered:
        thr = almost_clustered_threshold(g.n, stop.kappa)

    colors = np.array(c0, dtype=np.uint8, copy=True)
    records = np.zeros((stop.max_rounds + 1, 4), dtype=np.int64)
    executed = _kernels.run_rounds(
        g.adjacency,
        colors,
        np.uint64(base_key(ctx.seed, ctx.run)),
        ctx.round_index,
        stop.max_rounds,
        _RULE_IDS[rule],
        stop.stop_on_monochromatic,
        stop.stop_on_almost_clustered,
        thr,
        records,
    )
    executed = int(executed)
    table = np.empty((executed + 1, 5), dtype=np.int64)
    table[:, 0] = np.arange(executed + 1)
    table[:, 1:] = records[: executed + 1]
    terminal = classify(BiasPair(int(table[-1, 1]), int(table[-1, 2])), g.n, stop.kappa)
    return Trajectory(records=table, terminal=terminal, rounds_executed=executed)
