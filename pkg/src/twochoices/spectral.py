"""Spectral estimation for the community subgraphs.

The quantity of interest is the largest magnitude among the
non-principal eigenvalues of a community's random-walk transition
matrix.  It is estimated by power iteration on the square of the
deflated operator M = P - (1/n) J: squaring makes the iteration immune
to a tie between a positive and a negative eigenvalue of equal
magnitude, and the all-ones direction is projected out after every
multiplication (communities are regular, so the ones vector is exactly
the principal eigenvector and no linear solves are needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .graph import ClusteredRegularGraph, structure_report


@dataclass
class PowerIterationResult:
    value: float          # eigenvalue magnitude estimate
    iterations: int
    residual: float       # ||M^2 x - rho x|| at the returned iterate
    converged: bool


@dataclass
class SpectralReport:
    community1: PowerIterationResult
    community2: PowerIterationResult

    @property
    def lam(self) -> float:
        return max(self.community1.value, self.community2.value)


@dataclass
class HypothesisConstants:
    """Measured constants: c1 = (b/d) sqrt(n), c2 = lambda n^(1/4),
    h = 4 (2 sqrt(2) c1 + c2^2)."""

    c1: float
    c2: float
    h: float


def _community_matvec(intra: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = P x for the a-regular community, then deflate the ones direction."""
    y = x[intra].sum(axis=1) / intra.shape[1]
    return y - y.mean()


def community_lambda(
    g: ClusteredRegularGraph,
    community: int,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    seed: int = 7,
) -> PowerIterationResult:
    """Estimate the non-principal spectral radius of one community.

    Power iteration on the squared deflated transition matrix with a
    fixed-seed random start; stops when successive Rayleigh quotients
    differ by less than `tol`.  Failure to converge is reported in the
    result, never silently ignored.  Meaningful only when the community
    subgraph is connected (otherwise the estimate tends to 1).
    """
    if g.a == 0:
        raise ValueError("community has no intra edges; transition matrix undefined")
    intra = g.intra_adjacency(community)
    n = intra.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= x.mean()
    norm = np.linalg.norm(x)
    if norm == 0:
        x = np.zeros(n)
        x[0] = 1.0
        x -= x.mean()
        norm = np.linalg.norm(x)
    x /= norm

    rho_prev = math.inf
    rho = 0.0
    iterations = 0
    converged = False
    y = x
    for it in range(1, max_iter + 1):
        y = _community_matvec(intra, _community_matvec(intra, x))
        rho = float(x @ y)
        iterations = it
        if abs(rho - rho_prev) < tol:
            converged = True
            break
        rho_prev = rho
        norm = np.linalg.norm(y)
        if norm == 0:
            # x was (numerically) in the kernel of M^2: the non-principal
            # spectrum is exactly zero.
            rho = 0.0
            converged = True
            break
        x = y / norm

    residual = float(np.linalg.norm(y - rho * x))
    value = math.sqrt(max(rho, 0.0))
    return PowerIterationResult(
        value=value, iterations=iterations, residual=residual, converged=converged
    )


def spectral_report(
    g: ClusteredRegularGraph,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    seed: int = 7,
) -> SpectralReport:
    return SpectralReport(
        community1=community_lambda(g, 1, tol, max_iter, seed),
        community2=community_lambda(g, 2, tol, max_iter, seed),
    )


def dense_community_lambda(g: ClusteredRegularGraph, community: int) -> float:
    """Small-instance oracle: full dense eigendecomposition of the
    community transition matrix; drops the principal eigenvalue and
    returns the largest remaining magnitude."""
    intra = g.intra_adjacency(community)
    n = intra.shape[0]
    if n > 2048:
        raise ValueError("dense oracle is restricted to small communities")
    mat = np.zeros((n, n))
    rows = np.arange(n).repeat(intra.shape[1])
    np.add.at(mat, (rows, intra.ravel()), 1.0 / intra.shape[1])
    eigs = np.linalg.eigvalsh(mat)
    principal = int(np.argmax(eigs))
    rest = np.delete(eigs, principal)
    return float(np.max(np.abs(rest))) if rest.size else 0.0


def hypothesis_constants(n: int, d: int, b: int, lam: float) -> HypothesisConstants:
    """Exact arithmetic for the measured cut/expansion constants."""
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    c1 = (b / d) * math.sqrt(n)
    c2 = lam * n ** 0.25
    return HypothesisConstants(c1=c1, c2=c2, h=4.0 * (2.0 * math.sqrt(2.0) * c1 + c2 * c2))


def check_hypotheses(
    g: ClusteredRegularGraph,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    seed: int = 7,
) -> dict:
    """Advisory report comparing the graph against the analysis regime.

    Reports connectivity facts, the measured cut ratio b/d against
    n^(-1/2), the measured lambda against n^(-1/4), and the resulting
    constants.  Never raises on an unfavorable graph; simulation remains
    allowed regardless.
    """
    structure = structure_report(g)
    spect = spectral_report(g, tol=tol, max_iter=max_iter, seed=seed)
    lam = spect.lam
    consts = hypothesis_constants(g.n, g.d, g.b, lam) if lam < 1 else None
    cut_ratio = g.b / g.d
    return {
        "connected": structure.connected,
        "community_connected": list(structure.community_connected),
        "community_nonbipartite": list(structure.community_nonbipartite),
        "lambda": lam,
        "lambda_per_community": [spect.community1.value, spect.community2.value],
        "power_iteration_converged": [
            spect.community1.converged,
            spect.community2.converged,
        ],
        "b_over_d": cut_ratio,
        "cut_threshold": g.n ** -0.5,
        "cut_ok": cut_ratio <= g.n ** -0.5,
        "expansion_threshold": g.n ** -0.25,
        "expansion_ok": lam <= g.n ** -0.25,
        "constants": None
        if consts is None
        else {"c1": consts.c1, "c2": consts.c2, "h": consts.h},
    }
