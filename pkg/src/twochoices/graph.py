"""Clustered regular graphs: two same-size regular communities joined by
a regular bipartite cut.

A graph with community size ``n``, total degree ``d`` and cross degree
``b`` has node ids ``0..2n-1``; the first community occupies ``[0, n)``
and the second ``[n, 2n)``, so membership needs no extra storage.  Each
node has exactly ``a = d - b`` neighbors inside its community and ``b``
in the other one.  Adjacency is stored as a ``(2n, d)`` int32 array with
each row sorted, which makes serialization canonical and lets the intra
and cross blocks of a row be recovered by slicing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .rng import derive_seed


class GraphGenerationError(RuntimeError):
    """Raised when a randomized generator exhausts its restart budget."""


class GraphFormatError(ValueError):
    """Raised when a graph file cannot be parsed or is inconsistent."""


@dataclass(frozen=True)
class ClusteredRegularGraph:
    """Immutable clustered regular graph.

    Attributes
    ----------
    n : int
        Nodes per community (total nodes = 2n).
    d : int
        Degree of every node.
    b : int
        Cross-community degree of every node.
    adjacency : np.ndarray
        ``(2n, d)`` int32, row u sorted ascending, listing u's neighbors.
    """

    n: int
    d: int
    b: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.ascontiguousarray(self.adjacency, dtype=np.int32)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def a(self) -> int:
        """Intra-community degree."""
        return self.d - self.b

    @property
    def num_nodes(self) -> int:
        return 2 * self.n

    def community_slice(self, community: int) -> slice:
        if community not in (1, 2):
            raise ValueError("community must be 1 or 2")
        return slice(0, self.n) if community == 1 else slice(self.n, 2 * self.n)

    def intra_adjacency(self, community: int) -> np.ndarray:
        """(n, a) local-id adjacency of one community's induced subgraph."""
        rows = self.adjacency[self.community_slice(community)]
        if community == 1:
            mask = rows < self.n
            offset = 0
        else:
            mask = rows >= self.n
            offset = self.n
        intra = rows[mask]
        if intra.size != self.n * self.a:
            raise ValueError("community rows do not have uniform intra degree")
        return intra.reshape(self.n, self.a) - offset


@dataclass
class ValidationReport:
    ok: bool
    violations: List[Tuple[int, str]] = field(default_factory=list)


@dataclass
class StructureReport:
    """Connectivity / bipartiteness facts needed by the hypothesis checks."""

    connected: bool
    community_connected: Tuple[bool, bool]
    community_nonbipartite: Tuple[bool, bool]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

DEFAULT_RESTART_CAP = 1000


def _pair_stubs(n: int, a: int, rng: np.random.Generator) -> Optional[set]:
    """One attempt of the stub-pairing (configuration model) construction.

    Pairs stubs after a global shuffle; colliding stubs (self loops or
    duplicate edges) are re-shuffled and re-paired until either all are
    placed or no suitable pair remains (-> None, caller restarts).
    """
    edges: set = set()
    stubs = list(range(n)) * a
    while stubs:
        rng.shuffle(stubs)
        leftover = []
        it = iter(stubs)
        for u, v in zip(it, it):
            if u > v:
                u, v = v, u
            if u != v and (u, v) not in edges:
                edges.add((u, v))
            else:
                leftover.extend((u, v))
        if len(leftover) == len(stubs):
            # no progress: restart unless some suitable pair exists
            distinct = sorted(set(leftover))
            suitable = any(
                (x, y) not in edges
                for i, x in enumerate(distinct)
                for y in distinct[i + 1 :]
            )
            if not suitable:
                return None
        stubs = leftover
    return edges


def generate_regular_community(
    n: int, a: int, seed: int, max_restarts: int = DEFAULT_RESTART_CAP
) -> np.ndarray:
    """Sample a simple a-regular graph on n nodes by stub pairing.

    Returns the ``(n, a)`` sorted adjacency array (local node ids).
    Raises ``ValueError`` if ``n*a`` is odd or the degree is infeasible,
    and ``GraphGenerationError`` if the restart budget is exhausted.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes per community")
    if not 0 <= a <= n - 1:
        raise ValueError(f"intra degree a={a} not in [0, n-1]")
    if (n * a) % 2 != 0:
        raise ValueError(f"n*a must be even (handshake), got n={n} a={a}")
    if a == 0:
        return np.empty((n, 0), dtype=np.int32)

    rng = np.random.default_rng(seed)
    for _ in range(max_restarts):
        edges = _pair_stubs(n, a, rng)
        if edges is not None:
            return _adjacency_from_pairs(n, a, edges)
    raise GraphGenerationError(
        f"community generation failed after {max_restarts} restarts "
        f"(n={n}, a={a}, seed={seed})"
    )


def generate_regular_cut(
    n: int, b: int, seed: int, max_restarts: int = DEFAULT_RESTART_CAP
) -> np.ndarray:
    """Sample a simple b-regular bipartite cut as b disjoint matchings.

    Matching j is a uniform permutation resampled until it shares no
    edge with the matchings already placed.  Returns a ``(n, b)`` array:
    row i holds the local ids of i's partners on the other side, sorted.
    """
    if not 0 <= b <= n:
        raise ValueError(f"cross degree b={b} not in [0, n]")
    partners = np.empty((n, b), dtype=np.int32)
    if b == 0:
        return partners
    rng = np.random.default_rng(seed)
    used = np.empty(0, dtype=np.int64)
    base = np.arange(n, dtype=np.int64)
    for j in range(b):
        for _ in range(max_restarts):
            perm = rng.permutation(n)
            keys = base * n + perm
            if not np.isin(keys, used, assume_unique=True).any():
                partners[:, j] = perm
                used = np.sort(np.concatenate([used, keys]))
                break
        else:
            raise GraphGenerationError(
                f"cut generation failed after {max_restarts} restarts "
                f"(n={n}, b={b}, matching {j})"
            )
    partners.sort(axis=1)
    return partners


def _circulant_community(n: int, a: int) -> np.ndarray:
    """Deterministic circulant a-regular graph: i ~ i +/- 1..a/2 (mod n).

    For odd ``a`` (even ``n``) the antipodal neighbor i + n/2 is added.
    Useful as a reproducible poor-expander test family.
    """
    if not 0 <= a <= n - 1:
        raise ValueError(f"intra degree a={a} not in [0, n-1]")
    if a % 2 == 1 and n % 2 == 1:
        raise ValueError("odd circulant degree needs even n")
    offsets = []
    for k in range(1, a // 2 + 1):
        offsets.extend((k, n - k))
    if a % 2 == 1:
        offsets.append(n // 2)
    base = np.arange(n, dtype=np.int32)
    adj = np.empty((n, a), dtype=np.int32)
    for idx, off in enumerate(sorted(set(offsets))):
        adj[:, idx] = (base + off) % n
    adj.sort(axis=1)
    return adj


def _circulant_cut(n: int, b: int) -> np.ndarray:
    """Deterministic cut made of b shifted matchings: i ~ (i + j) mod n."""
    if not 0 <= b <= n:
        raise ValueError(f"cross degree b={b} not in [0, n]")
    base = np.arange(n, dtype=np.int32)
    partners = np.empty((n, b), dtype=np.int32)
    for j in range(b):
        partners[:, j] = (base + j) % n
    partners.sort(axis=1)
    return partners


def generate_clustered_regular(
    n: int,
    a: int,
    b: int,
    seed: int,
    method: str = "pairing",
    max_restarts: int = DEFAULT_RESTART_CAP,
) -> ClusteredRegularGraph:
    """Generate a clustered regular graph with the given parameters.

    ``method="pairing"`` samples both communities by stub pairing and
    the cut as disjoint random matchings, all from seeds derived from
    `seed`.  ``method="circulant"`` builds the fully deterministic
    circulant family instead (no randomness; useful as a reproducible
    poor expander).  The result always passes :func:`validate`.
    """
    if method == "pairing":
        comm1 = generate_regular_community(n, a, derive_seed(seed, 0, tag=1), max_restarts)
        comm2 = generate_regular_community(n, a, derive_seed(seed, 1, tag=1), max_restarts)
        cut = generate_regular_cut(n, b, derive_seed(seed, 2, tag=1), max_restarts)
    elif method == "circulant":
        comm1 = _circulant_community(n, a)
        comm2 = comm1.copy()
        cut = _circulant_cut(n, b)
    else:
        raise ValueError(f"unknown method {method!r}")

    d = a + b
    adj = np.empty((2 * n, d), dtype=np.int32)
    adj[:n, :a] = comm1
    adj[n:, :a] = comm2 + n
    adj[:n, a:] = cut + n
    # reverse direction of the cut: partners of V2-local node j
    rev = np.empty((n, b), dtype=np.int32)
    if b:
        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            for j in cut[i]:
                rev[j, counts[j]] = i
                counts[j] += 1
    adj[n:, a:] = rev
    adj.sort(axis=1)

    g = ClusteredRegularGraph(n=n, d=d, b=b, adjacency=adj)
    report = validate(g)
    if not report.ok:
        raise GraphGenerationError(f"generated graph failed validation: {report.violations[:5]}")
    return g


def _adjacency_from_pairs(n: int, deg: int, edges: Iterable[Tuple[int, int]]) -> np.ndarray:
    adj = np.empty((n, deg), dtype=np.int32)
    fill = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        adj[u, fill[u]] = v
        fill[u] += 1
        adj[v, fill[v]] = u
        fill[v] += 1
    if not (fill == deg).all():
        raise GraphGenerationError("pairing produced non-uniform degrees")
    adj.sort(axis=1)
    return adj


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate(g: ClusteredRegularGraph) -> ValidationReport:
    """Check degree, cross-degree, simplicity, and symmetry node by node.

    Violation kinds: ``degree`` (out-of-range neighbor id or wrong row
    arity), ``cross-degree``, ``self-loop``, ``duplicate``, ``asymmetry``.
    """
    adj = g.adjacency
    two_n = g.num_nodes
    violations: List[Tuple[int, str]] = []

    if adj.shape != (two_n, g.d):
        return ValidationReport(False, [(-1, "degree")])

    ids = np.arange(two_n, dtype=np.int32)
    in_range = (adj >= 0) & (adj < two_n)
    for u in np.nonzero(~in_range.all(axis=1))[0]:
        violations.append((int(u), "degree"))

    self_loop = (adj == ids[:, None]).any(axis=1)
    for u in np.nonzero(self_loop)[0]:
        violations.append((int(u), "self-loop"))

    srt = np.sort(adj, axis=1)
    dup = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
    for u in np.nonzero(dup)[0]:
        violations.append((int(u), "duplicate"))

    cross = np.where(ids[:, None] < g.n, adj >= g.n, adj < g.n)
    cross_deg = (cross & in_range).sum(axis=1)
    for u in np.nonzero(cross_deg != g.b)[0]:
        violations.append((int(u), "cross-degree"))

    # symmetry: the multiset of directed pairs must equal its reverse
    safe = np.clip(adj, 0, two_n - 1).astype(np.int64)
    fwd = np.sort(ids.astype(np.int64).repeat(g.d) * two_n + safe.ravel())
    bwd = np.sort(safe.ravel() * two_n + ids.astype(np.int64).repeat(g.d))
    if fwd.shape != bwd.shape or not np.array_equal(fwd, bwd):
        bad_fwd = fwd[~np.isin(fwd, bwd)]
        bad_bwd = bwd[~np.isin(bwd, fwd)]
        bad_nodes = set(int(k // two_n) for k in bad_fwd) | set(
            int(k % two_n) for k in bad_bwd
        )
        for u in sorted(bad_nodes):
            violations.append((u, "asymmetry"))

    violations.sort()
    return ValidationReport(ok=not violations, violations=violations)


# ---------------------------------------------------------------------------
# connectivity / bipartiteness
# ---------------------------------------------------------------------------


def _reachable(adj: np.ndarray, start: int = 0) -> np.ndarray:
    num = adj.shape[0]
    seen = np.zeros(num, dtype=bool)
    if adj.shape[1] == 0:
        seen[start] = True
        return seen
    seen[start] = True
    frontier = np.array([start])
    while frontier.size:
        nxt = np.unique(adj[frontier].ravel())
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return seen


def is_connected(adj: np.ndarray) -> bool:
    return bool(_reachable(adj).all())


def is_bipartite(adj: np.ndarray) -> bool:
    """Two-coloring by BFS parity; exact and O(n*deg)."""
    num = adj.shape[0]
    if adj.shape[1] == 0:
        return True
    parity = np.full(num, -1, dtype=np.int8)
    for s in range(num):
        if parity[s] >= 0:
            continue
        parity[s] = 0
        frontier = np.array([s])
        while frontier.size:
            nxt = np.unique(adj[frontier].ravel())
            nxt = nxt[parity[nxt] < 0]
            parity[nxt] = 1 - parity[frontier[0]]
            frontier = nxt
    return not bool((parity[adj] == parity[:, None]).any())


def structure_report(g: ClusteredRegularGraph) -> StructureReport:
    """Connectivity of the graph and of each community, plus whether each
    community subgraph is non-bipartite."""
    intra1 = g.intra_adjacency(1)
    intra2 = g.intra_adjacency(2)
    return StructureReport(
        connected=is_connected(g.adjacency),
        community_connected=(is_connected(intra1), is_connected(intra2)),
        community_nonbipartite=(not is_bipartite(intra1), not is_bipartite(intra2)),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_HEADER_MAGIC = "crg v1"


def save_graph(g: ClusteredRegularGraph, path) -> None:
    """Write the text format: magic line, parameter line, sorted edges u<v."""
    adj = g.adjacency
    ids = np.arange(g.num_nodes, dtype=np.int64)
    u = ids.repeat(g.d)
    v = adj.ravel().astype(np.int64)
    keep = u < v
    keys = np.sort(u[keep] * g.num_nodes + v[keep])
    lines = [_HEADER_MAGIC, f"n={g.n} d={g.d} b={g.b}"]
    lines.extend(f"{k // g.num_nodes} {k % g.num_nodes}" for k in keys)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> ClusteredRegularGraph:
    """Read the text format back; the result must pass validation."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _HEADER_MAGIC:
        raise GraphFormatError(f"missing '{_HEADER_MAGIC}' header line")
    try:
        params = dict(tok.split("=") for tok in lines[1].split())
        n, d, b = int(params["n"]), int(params["d"]), int(params["b"])
    except (IndexError, KeyError, ValueError) as exc:
        raise GraphFormatError("malformed parameter line") from exc

    two_n = 2 * n
    counts = np.zeros(two_n, dtype=np.int64)
    adj = np.empty((two_n, d), dtype=np.int32)
    seen = set()
    for ln in lines[2:]:
        try:
            us, vs = ln.split()
            u, v = int(us), int(vs)
        except ValueError as exc:
            raise GraphFormatError(f"malformed edge line {ln!r}") from exc
        if not (0 <= u < two_n and 0 <= v < two_n):
            raise GraphFormatError(f"node id out of range in edge {ln!r}")
        if u >= v:
            raise GraphFormatError(f"edge {ln!r} not in u<v form")
        if (u, v) in seen:
            raise GraphFormatError(f"duplicate edge {ln!r}")
        seen.add((u, v))
        if counts[u] >= d or counts[v] >= d:
            raise GraphFormatError(f"degree overflow at edge {ln!r}")
        adj[u, counts[u]] = v
        adj[v, counts[v]] = u
        counts[u] += 1
        counts[v] += 1
    if not (counts == d).all():
        raise GraphFormatError("edge list does not realize a d-regular graph")
    adj.sort(axis=1)
    g = ClusteredRegularGraph(n=n, d=d, b=b, adjacency=adj)
    report = validate(g)
    if not report.ok:
        raise GraphFormatError(f"loaded graph violates invariants: {report.violations[:5]}")
    return g
