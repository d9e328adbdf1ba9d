import math

import numpy as np
import pytest

from twochoices import graph as gm, spectral


def test_complete_graph_community():
    # K5 community: transition spectrum {1, -1/4}, so the estimate is 0.25
    g = gm.generate_clustered_regular(5, 4, 1, seed=0, method="circulant")
    res = spectral.community_lambda(g, 1, tol=1e-12)
    assert res.converged
    assert abs(res.value - 0.25) < 1e-6


def test_odd_cycle_community():
    # C5 community: largest non-principal magnitude is cos(pi/5)
    g = gm.generate_clustered_regular(5, 2, 1, seed=0, method="circulant")
    res = spectral.community_lambda(g, 1, tol=1e-12)
    assert abs(res.value - 0.8090169943749475) < 1e-6


def test_power_iteration_matches_dense_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(16, 65))
        a = int(rng.integers(3, 8))
        if (n * a) % 2:
            a += 1
        g = gm.generate_clustered_regular(n, a, 1, seed=int(rng.integers(1 << 30)))
        for community in (1, 2):
            est = spectral.community_lambda(g, community, tol=1e-13, max_iter=200_000)
            oracle = spectral.dense_community_lambda(g, community)
            assert abs(est.value - oracle) <= 1e-6, (n, a, community)


def test_even_cycle_community_is_bipartite():
    g = gm.generate_clustered_regular(6, 2, 1, seed=0, method="circulant")
    report = spectral.check_hypotheses(g)
    assert report["community_nonbipartite"] == [False, False]
    assert abs(report["lambda"] - 1.0) < 1e-6


def test_hypothesis_constants_frozen_values():
    # recomputed with 30-digit arithmetic
    c = spectral.hypothesis_constants(1000, 130, 2, 0.18)
    assert abs(c.c1 - 0.4865042554105199) < 1e-12
    assert abs(c.c2 - 1.0122143853426283) < 1e-12
    assert abs(c.h - 9.6024791768084712) < 1e-11

    c = spectral.hypothesis_constants(100, 20, 2, 0.1)
    assert abs(c.c1 - 1.0) < 1e-12
    assert abs(c.c2 - 0.31622776601683793) < 1e-12
    assert abs(c.h - 11.71370849898476) < 1e-11


def test_hypothesis_constants_zero_case():
    c = spectral.hypothesis_constants(123, 10, 0, 0.0)
    assert c.c1 == 0.0 and c.c2 == 0.0 and c.h == 0.0


def test_hypothesis_constants_rejects_bad_lambda():
    with pytest.raises(ValueError):
        spectral.hypothesis_constants(10, 4, 1, 1.0)


def test_constants_scale_consistency():
    # doubling lambda doubles c2 and raises h by exactly 12 * c2(lambda)^2
    n, d, b, lam = 500, 40, 3, 0.11
    c = spectral.hypothesis_constants(n, d, b, lam)
    c2x = spectral.hypothesis_constants(n, d, b, 2 * lam)
    assert abs(c2x.c2 - 2 * c.c2) < 1e-12
    assert abs((c2x.h - c.h) - 12 * c.c2 ** 2) < 1e-9


def test_check_hypotheses_disconnected_cut():
    g = gm.generate_clustered_regular(20, 4, 0, seed=1)
    report = spectral.check_hypotheses(g)
    assert report["connected"] is False


def test_check_hypotheses_on_target_regime_graph():
    # random 128-regular communities: lambda ~ 2 sqrt(127)/128, i.e. c2 ~ 1
    g = gm.generate_clustered_regular(1000, 128, 2, seed=9)
    report = spectral.check_hypotheses(g, tol=1e-10)
    assert report["connected"]
    assert all(report["community_connected"]) and all(report["community_nonbipartite"])
    consts = report["constants"]
    assert consts["c1"] < 1.0
    assert 0.9 <= consts["c2"] <= 1.1
    assert report["cut_ok"]


def test_power_iteration_reports_nonconvergence():
    g = gm.generate_clustered_regular(64, 6, 1, seed=2)
    res = spectral.community_lambda(g, 1, tol=1e-16, max_iter=3)
    assert not res.converged
