"""Community-sensitive labeling: amplify the clustering probability by
running several independent copies of the dynamics per node.

Each node carries a vector of `ell` colors; component k evolves under
an independent run (run id k) of the two-choices dynamics from its own
random initialization.  Exact equality of two nodes' vectors then acts
as a same-community predicate: one clustered component distinguishes
the communities, and the chance that no component clusters decays
geometrically in `ell`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import random_init
from .graph import ClusteredRegularGraph
from .rng import base_key


@dataclass
class CslScore:
    intra_equal_rate: float
    inter_diff_rate: float
    outlier_pairs: int
    pairs_evaluated: int

    @property
    def accuracy(self) -> float:
        """The weaker of the two pair rates."""
        return min(self.intra_equal_rate, self.inter_diff_rate)


def default_ell(g: ClusteredRegularGraph) -> int:
    return 4 * math.ceil(math.log2(g.num_nodes))


def default_snapshot_rounds(g: ClusteredRegularGraph) -> int:
    return 6 * math.ceil(math.log(g.num_nodes))


def csl_run(
    g: ClusteredRegularGraph, ell: int, rounds: int, seed: int
) -> np.ndarray:
    """Label matrix after `rounds` rounds: (2n, ell) uint8, column k being
    an independent full run of the dynamics with run id k."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    labels = np.empty((g.num_nodes, ell), dtype=np.uint8)
    no_records = np.zeros((0, 4), dtype=np.int64)
    for k in range(ell):
        colors = random_init(g, seed, run=k)
        if rounds:
            _kernels.run_rounds(
                g.adjacency,
                colors,
                np.uint64(base_key(seed, k)),
                0,
                rounds,
                _kernels.RULE_TWO_CHOICES,
                False,
                False,
                0,
                no_records,
            )
        labels[:, k] = colors
    return labels


def csl_predicate(u_vec: np.ndarray, v_vec: np.ndarray) -> bool:
    """Same-community predicate: component-wise equality of the vectors."""
    u = np.asarray(u_vec)
    v = np.asarray(v_vec)
    if u.shape != v.shape:
        raise ValueError(f"label vectors differ in length: {u.shape} vs {v.shape}")
    return bool(np.array_equal(u, v))


def _exact_score(g: ClusteredRegularGraph, labels: np.ndarray) -> CslScore:
    # Group identical vectors; pair counts then follow from the group
    # sizes per community, so the evaluation is exact yet O(n + k^2).
    _, inverse = np.unique(labels, axis=0, return_inverse=True)
    n = g.n
    ids1 = inverse[:n]
    ids2 = inverse[n:]
    num_groups = int(inverse.max()) + 1
    cnt1 = np.bincount(ids1, minlength=num_groups).astype(np.int64)
    cnt2 = np.bincount(ids2, minlength=num_groups).astype(np.int64)

    intra_pairs = n * (n - 1)  # C(n,2) per community, two communities
    intra_equal = int((cnt1 * (cnt1 - 1)).sum() + (cnt2 * (cnt2 - 1)).sum()) // 2
    inter_pairs = n * n
    inter_equal = int((cnt1 * cnt2).sum())

    outliers = (intra_pairs - intra_equal) + inter_equal
    return CslScore(
        intra_equal_rate=intra_equal / intra_pairs if intra_pairs else 1.0,
        inter_diff_rate=(inter_pairs - inter_equal) / inter_pairs if inter_pairs else 1.0,
        outlier_pairs=outliers,
        pairs_evaluated=intra_pairs + inter_pairs,
    )


def _sampled_score(
    g: ClusteredRegularGraph, labels: np.ndarray, pair_budget: int, seed: int
) -> CslScore:
    rng = np.random.default_rng(seed)
    two_n = g.num_nodes
    u = rng.integers(0, two_n, size=pair_budget)
    v = rng.integers(0, two_n - 1, size=pair_budget)
    v = np.where(v >= u, v + 1, v)  # uniform over ordered distinct pairs
    same_comm = (u < g.n) == (v < g.n)
    equal = (labels[u] == labels[v]).all(axis=1)

    intra_total = int(same_comm.sum())
    intra_equal = int((same_comm & equal).sum())
    inter_total = pair_budget - intra_total
    inter_diff = int((~same_comm & ~equal).sum())
    outliers = (intra_total - intra_equal) + (inter_total - inter_diff)
    return CslScore(
        intra_equal_rate=intra_equal / intra_total if intra_total else 1.0,
        inter_diff_rate=inter_diff / inter_total if inter_total else 1.0,
        outlier_pairs=outliers,
        pairs_evaluated=pair_budget,
    )


def csl_score(
    g: ClusteredRegularGraph,
    labels: np.ndarray,
    pair_budget: int = 200_000,
    seed: int = 0,
    hamming_tol: int = 0,
) -> CslScore:
    """Pairwise community-detection score of a label matrix.

    Evaluates every pair when the graph has at most 4000 nodes,
    otherwise `pair_budget` uniformly sampled pairs.  A same-community
    pair counts as correct iff the predicate holds, a cross-community
    pair iff it does not.  `hamming_tol > 0` relaxes the predicate to
    Hamming distance <= tol (robustness studies; forces pair sampling
    arithmetic through the generic path).
    """
    if labels.shape[0] != g.num_nodes:
        raise ValueError("label matrix does not match the graph size")
    if hamming_tol == 0:
        if g.num_nodes <= 4000:
            return _exact_score(g, labels)
        return _sampled_score(g, labels, pair_budget, seed)
    return _hamming_score(g, labels, pair_budget, seed, hamming_tol)


def _hamming_score(
    g: ClusteredRegularGraph,
    labels: np.ndarray,
    pair_budget: int,
    seed: int,
    tol: int,
) -> CslScore:
    two_n = g.num_nodes
    if two_n <= 4000:
        packed = np.packbits(labels, axis=1)
        intra_pairs = g.n * (g.n - 1)  # 2 * C(n, 2), each unordered pair once
        inter_pairs = g.n * g.n
        intra_equal = 0
        inter_equal = 0
        for u in range(two_n):
            dist = np.bitwise_count(packed[u + 1 :] ^ packed[u]).sum(axis=1)
            close = dist <= tol
            same = (np.arange(u + 1, two_n) < g.n) == (u < g.n)
            intra_equal += int((close & same).sum())
            inter_equal += int((close & ~same).sum())
        return CslScore(
            intra_equal_rate=intra_equal / intra_pairs if intra_pairs else 1.0,
            inter_diff_rate=(inter_pairs - inter_equal) / inter_pairs if inter_pairs else 1.0,
            outlier_pairs=(intra_pairs - intra_equal) + inter_equal,
            pairs_evaluated=intra_pairs + inter_pairs,
        )
    rng = np.random.default_rng(seed)
    u = rng.integers(0, two_n, size=pair_budget)
    v = rng.integers(0, two_n - 1, size=pair_budget)
    v = np.where(v >= u, v + 1, v)
    same_comm = (u < g.n) == (v < g.n)
    equal = (labels[u] != labels[v]).sum(axis=1) <= tol
    intra_total = int(same_comm.sum())
    intra_equal = int((same_comm & equal).sum())
    inter_total = pair_budget - intra_total
    inter_diff = int((~same_comm & ~equal).sum())
    return CslScore(
        intra_equal_rate=intra_equal / intra_total if intra_total else 1.0,
        inter_diff_rate=inter_diff / inter_total if inter_total else 1.0,
        outlier_pairs=(intra_total - intra_equal) + (inter_total - inter_diff),
        pairs_evaluated=pair_budget,
    )
