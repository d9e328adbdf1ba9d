"""Counter-based random streams for reproducible parallel simulation.

Every random draw is a pure function of the tuple
``(seed, run, round, node, draw)``.  A 64-bit stream key is derived from
``(seed, run, round)`` by chained SplitMix64-style mixing and the
per-node draw is read off one more mix of ``key + node*GAMMA +
draw*DRAW_STRIDE``.  Draws therefore never depend on execution order,
worker count, or earlier draws, which keeps simulations replayable and
embarrassingly parallel.

The same constants are used by the scalar kernels in ``_kernels``; the
two implementations are checked against each other in the test suite.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# SplitMix64 finalizer multipliers.
MIX_M1 = 0xBF58476D1CE4E5B9
MIX_M2 = 0x94D049BB133111EB

# Odd strides/offsets for folding the key fields.  GAMMA is the golden
# ratio increment of SplitMix64; the others are arbitrary odd constants.
GAMMA = 0x9E3779B97F4A7C15
SEED_OFFSET = 0x8BB84B93962EACC9
RUN_OFFSET = 0x2F653B67276C8E03
ROUND_OFFSET = 0x632BE59BD9B4E019
DRAW_STRIDE = 0xD1B54A32D192ED03

_U = np.uint64
_GAMMA_U = _U(GAMMA)
_DRAW_U = _U(DRAW_STRIDE)
_M1_U = _U(MIX_M1)
_M2_U = _U(MIX_M2)


def _mix64_int(z: int) -> int:
    """SplitMix64 finalizer on python ints (masked 64-bit arithmetic)."""
    z = ((z ^ (z >> 30)) * MIX_M1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_M2) & MASK64
    return z ^ (z >> 31)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    z = (z ^ (z >> _U(30))) * _M1_U
    z = (z ^ (z >> _U(27))) * _M2_U
    return z ^ (z >> _U(31))


def base_key(seed: int, run: int) -> int:
    """Fold (seed, run) into a 64-bit key; the round is folded later."""
    z = _mix64_int((seed * GAMMA + SEED_OFFSET) & MASK64)
    return _mix64_int(z ^ ((run * GAMMA + RUN_OFFSET) & MASK64))


def fold_round(base: int, round_index: int) -> int:
    """Fold a round index (may be negative, e.g. -1 for init) into a key."""
    return _mix64_int(base ^ ((round_index * GAMMA + ROUND_OFFSET) & MASK64))


def stream_key(seed: int, run: int = 0, round_index: int = 0) -> int:
    """64-bit key identifying the draw stream of one (seed, run, round)."""
    return fold_round(base_key(seed, run), round_index)


def draw_words(key: int, nodes: np.ndarray, draw: int) -> np.ndarray:
    """One mixed 64-bit word per node for draw index `draw` (0 or 1)."""
    z = _U(key) + nodes * _GAMMA_U + _U(draw) * _DRAW_U
    return mix64(z)


def uniform_indices(key: int, nodes: np.ndarray, draw: int, bound: int) -> np.ndarray:
    """Per-node uniform draw in [0, bound) via the 32-bit multiply-shift map.

    The map ``((word >> 32) * bound) >> 32`` has relative bias below
    ``bound / 2**32``, which is negligible for the neighbor-list sizes
    used here and is branch-free so the numba kernels can mirror it
    exactly.
    """
    words = draw_words(key, nodes, draw)
    return (((words >> _U(32)) * _U(bound)) >> _U(32)).astype(np.int64)


def fair_bits(key: int, nodes: np.ndarray, draw: int = 0) -> np.ndarray:
    """Per-node fair coin (0/1 uint8)."""
    return (draw_words(key, nodes, draw) & _U(1)).astype(np.uint8)


def derive_seed(seed: int, index: int, tag: int = 0) -> int:
    """Derive an independent child seed, e.g. one per trial or column."""
    z = _mix64_int((seed * GAMMA + SEED_OFFSET) & MASK64)
    z = _mix64_int(z ^ ((index * GAMMA + RUN_OFFSET) & MASK64))
    return _mix64_int(z ^ ((tag * GAMMA + ROUND_OFFSET) & MASK64))


def node_ids(count: int) -> np.ndarray:
    """uint64 arange used as the node axis of the vectorized draws."""
    return np.arange(count, dtype=np.uint64)
