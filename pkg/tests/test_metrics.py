import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from photonids.metrics import (classification_metrics, confusion_matrix, regression_metrics,
                               roc_auc, silhouette, snr_gain, snr_table, snr_table_text, to_db)
from oracles import auc_oracle, silhouette_oracle


def test_regression_small_example():
    r = regression_metrics([1.0, 2.0, 5.0], [1.0, 2.0, 3.0], tau=1.0).channels["ch0"]
    assert r.mae == pytest.approx(2 / 3)
    assert r.rmse == pytest.approx(math.sqrt(4 / 3))
    assert r.tolerance_accuracy == pytest.approx(2 / 3)
    assert r.r_squared == pytest.approx(1 - 4 / 2)


def test_regression_perfect_and_constant_target():
    r = regression_metrics(np.arange(5.0), np.arange(5.0)).channels["ch0"]
    assert (r.mae, r.rmse, r.r_squared, r.tolerance_accuracy) == (0, 0, 1, 1)
    assert regression_metrics(np.ones(3), np.ones(3)).channels["ch0"].r_squared is None
    with pytest.raises(ValueError):
        regression_metrics([], [])


def test_regression_multichannel_names():
    rep = regression_metrics(np.zeros((4, 2)), np.ones((4, 2)), names=["a", "b"])
    assert list(rep.channels) == ["a", "b"]
    assert "tolerance tau = 50" in rep.to_text()


def test_classification_counts():
    y = [0, 0, 1, 1, 1]
    yhat = [0, 1, 1, 1, 0]
    rep = classification_metrics(y, yhat, scores=[0.1, 0.6, 0.9, 0.8, 0.3])
    assert rep.confusion == ((1, 1), (1, 2))
    assert rep.accuracy == pytest.approx(0.6)
    assert rep.precision == pytest.approx((0.5, 2 / 3))
    assert rep.recall == pytest.approx((0.5, 2 / 3))
    np.testing.assert_allclose(rep.confusion_normalized, [[0.5, 0.5], [1 / 3, 2 / 3]])
    assert rep.roc_auc == pytest.approx(5 / 6)
    assert rep.confusion_csv().splitlines()[1] == "dark,1,1"


def test_classification_single_class_has_no_auc():
    rep = classification_metrics([1, 1], [1, 0], scores=[0.2, 0.1])
    assert rep.roc_auc is None
    assert rep.precision[0] == 0.0


def test_confusion_matrix_total():
    rng = np.random.default_rng(0)
    y, p = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
    assert confusion_matrix(y, p).sum() == 100


@given(st.lists(st.tuples(st.integers(0, 8), st.booleans()), min_size=2, max_size=200))
def test_auc_matches_pairwise_oracle(pairs):
    scores = [s / 8 for s, _ in pairs]
    labels = [l for _, l in pairs]
    if all(labels) or not any(labels):
        with pytest.raises(ValueError):
            roc_auc(scores, labels)
        return
    assert abs(roc_auc(scores, labels) - auc_oracle(scores, labels)) <= 1e-12


def test_auc_extremes():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert roc_auc([0.5] * 4, [0, 1, 0, 1]) == 0.5


def test_silhouette_matches_definition():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(3, 101))
        x = rng.normal(size=(n, int(rng.integers(1, 5))))
        labels = rng.integers(0, int(rng.integers(2, 4)), n)
        if len(set(labels)) < 2:
            continue
        assert abs(silhouette(x, labels, chunk=17) - silhouette_oracle(x, list(labels))) <= 1e-12


def test_silhouette_separated_clusters_near_one():
    x = np.concatenate([np.zeros((10, 2)), np.full((10, 2), 100.0)]) + \
        np.random.default_rng(0).normal(0, 0.01, (20, 2))
    assert silhouette(x, [0] * 10 + [1] * 10) > 0.99
    with pytest.raises(ValueError):
        silhouette(x, [0] * 20)


def test_snr_gain_definition():
    r = snr_gain(4000, 300, 0.997, 0.032)
    assert r.snr == pytest.approx(40 / 3)
    assert r.gain == pytest.approx(0.997 / 0.032)
    assert r.snr_prime == pytest.approx(r.snr * r.gain)
    assert r.snr_db == pytest.approx(to_db(40 / 3))


def test_snr_zero_fpr_is_infinite_gain():
    r = snr_gain(10, 5, 0.9, 0.0)
    assert math.isinf(r.gain) and r.snr_prime is None
    assert r.to_dict()["gain"] == "inf"
    assert "undef" in snr_table_text([r])


def test_snr_validation():
    with pytest.raises(ValueError):
        snr_gain(0, 1, 0.5, 0.5)
    with pytest.raises(ValueError):
        snr_gain(1, 1, 1.5, 0.5)


def test_snr_table_rows():
    rows = snr_table(4000, (300, 3000, 20000), 0.997, 0.032)
    assert [r.B for r in rows] == [300, 3000, 20000]
    assert len(snr_table_text(rows).splitlines()) == 4
