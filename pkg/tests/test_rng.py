import numpy as np
import pytest

from twochoices import rng


def test_stream_key_pure_function_of_tuple():
    assert rng.stream_key(1, 2, 3) == rng.stream_key(1, 2, 3)
    keys = {
        rng.stream_key(s, r, t)
        for s in (0, 1, 99)
        for r in (0, 1, 7)
        for t in (-1, 0, 1, 10)
    }
    assert len(keys) == 3 * 3 * 4


def test_negative_round_is_a_distinct_stream():
    assert rng.stream_key(5, 0, -1) != rng.stream_key(5, 0, 0)


def test_vectorized_mix_matches_scalar():
    nodes = rng.node_ids(200)
    key = rng.stream_key(12, 3, 4)
    vec = rng.draw_words(key, nodes, 1)
    for u in (0, 1, 57, 199):
        scalar = rng._mix64_int(
            (key + u * rng.GAMMA + rng.DRAW_STRIDE) & rng.MASK64
        )
        assert int(vec[u]) == scalar


def test_uniform_indices_range_and_balance():
    nodes = rng.node_ids(200_000)
    idx = rng.uniform_indices(rng.stream_key(0), nodes, 0, 7)
    assert idx.min() >= 0 and idx.max() <= 6
    counts = np.bincount(idx, minlength=7)
    # multinomial(200000, 1/7): sd per cell ~ 156
    assert np.abs(counts - 200_000 / 7).max() < 5 * 156


def test_fair_bits_balance_and_determinism():
    nodes = rng.node_ids(100_000)
    key = rng.stream_key(42, 0, -1)
    bits = rng.fair_bits(key, nodes, 0)
    assert np.array_equal(bits, rng.fair_bits(key, nodes, 0))
    # 3 sigma for Binomial(1e5, 1/2)
    assert abs(int(bits.sum()) - 50_000) < 3 * 158.2


def test_derived_seeds_are_distinct():
    seeds = {rng.derive_seed(9, i, tag=t) for i in range(100) for t in range(4)}
    assert len(seeds) == 400


def test_draws_differ_between_draw_indices():
    nodes = rng.node_ids(1000)
    key = rng.stream_key(3, 1, 2)
    a = rng.uniform_indices(key, nodes, 0, 1000)
    b = rng.uniform_indices(key, nodes, 1, 1000)
    assert not np.array_equal(a, b)
