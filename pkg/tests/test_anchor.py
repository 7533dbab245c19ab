import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from photonids.anchor import (AnchorModel, DegenerateFeature, encode_position, fit_anchor,
                              kde_density, kde_mode, scott_bandwidth)
from oracles import direct_kde


def test_single_sample_peak_height():
    assert kde_density([3.0], 0.5, 3.0) == pytest.approx(1 / (0.5 * math.sqrt(2 * math.pi)), rel=1e-15)


@given(st.floats(0.1, 10), st.floats(0.1, 5), st.floats(0, 20))
def test_symmetric_pair(a, h, t):
    s = [-a, a]
    assert kde_density(s, h, t) == pytest.approx(kde_density(s, h, -t), rel=1e-12, abs=1e-300)


def test_matches_direct_summation():
    rng = np.random.default_rng(0)
    s = rng.normal(2, 3, 100)
    t = rng.uniform(-10, 14, 20)
    got = kde_density(s, 0.7, t)
    ref = np.array([direct_kde(s, 0.7, x) for x in t])
    assert np.abs(got - ref).max() <= 1e-12


def test_density_normalizes():
    s = np.random.default_rng(1).gamma(2, 2, 300)
    h = scott_bandwidth(s)
    t = np.linspace(s.min() - 10 * h, s.max() + 10 * h, 20001)
    assert abs(np.trapezoid(kde_density(s, h, t), t) - 1) <= 1e-3


def test_bad_inputs():
    with pytest.raises(ValueError):
        kde_density([], 1.0, 0.0)
    with pytest.raises(ValueError):
        kde_density([1.0], 0.0, 0.0)


def test_single_sample_mode():
    h = 0.3
    cell = (6 * h) / 2047
    assert abs(kde_mode([5.0], h) - 5.0) <= cell


def test_pair_mode_at_midpoint_when_unimodal():
    a, h = 1.0, 2.0
    t = np.linspace(-5, 5, 10001)
    f = kde_density([-a, a], h, t)
    assert np.all(np.diff(f[t <= 0]) >= 0) and np.all(np.diff(f[t >= 0]) <= 0)  # unimodal
    cell = (2 * a + 6 * h) / 2047
    assert abs(kde_mode([-a, a], h)) <= cell


def test_mode_agrees_with_fine_grid():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = np.r_[rng.normal(0, 1, 150), rng.normal(rng.uniform(2, 6), 0.7, 100)]
        h = scott_bandwidth(s)
        lo, hi = s.min() - 3 * h, s.max() + 3 * h
        fine = np.linspace(lo, hi, 16 * 2047 + 1)
        ref = fine[np.argmax(kde_density(s, h, fine))]
        assert abs(kde_mode(s, h) - ref) <= (hi - lo) / 2047


def test_ruler_arithmetic():
    v = np.array([[0.0, 1, 2, 3], [1000.0, 2, 4, 5]])
    a = fit_anchor(v, F=1000.0)
    assert a.anchors["peak"].delta == pytest.approx(1.0)
    assert all(a.anchors[k].min <= a.anchors[k].mu <= a.anchors[k].max for k in a.anchors)


def test_degenerate_feature_named():
    v = np.ones((10, 4))
    v[:, 0] = np.arange(10)
    with pytest.raises(DegenerateFeature, match="rise"):
        fit_anchor(v)


def test_encode_examples():
    rng = np.random.default_rng(3)
    a = fit_anchor(rng.normal(size=(500, 4)) * [100, 1, 2, 3] + [5000, 3, 20, 9])
    assert np.allclose(encode_position(a.mu, a), 0)
    assert np.allclose(encode_position(a.mu + a.delta, a), 1)
    # min maps to -F when the mode sits at the max
    from photonids.anchor import FeatureAnchor
    fa = {k: FeatureAnchor(mu=10.0, delta=(10.0 - 2.0) / 1000, h=1.0, min=2.0, max=10.0) for k in a.anchors}
    b = AnchorModel(fa, 1000.0)
    assert np.allclose(encode_position(np.full(4, 2.0), b), -1000.0)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_encode_is_increasing(v, dv):
    a = fit_anchor(np.random.default_rng(4).normal(size=(200, 4)))
    assert np.all(encode_position(np.full(4, v + dv), a) > encode_position(np.full(4, v), a))


def test_doubling_F_doubles_positions():
    v = np.random.default_rng(5).normal(size=(300, 4)) * [10, 1, 1, 1]
    p1 = encode_position(v, fit_anchor(v, F=1000.0))
    p2 = encode_position(v, fit_anchor(v, F=2000.0))
    assert np.allclose(p2, 2 * p1, rtol=1e-12, atol=1e-9)
    assert np.array_equal(np.argsort(p1, axis=0), np.argsort(p2, axis=0))


def test_json_roundtrip():
    a = fit_anchor(np.random.default_rng(6).normal(size=(100, 4)))
    assert AnchorModel.from_json(a.to_json()) == a
