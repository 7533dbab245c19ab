import numpy as np
import pytest

from gradcheck import check_layer, check_losses, layer_cases
from photonids.neural import (AdamState, BatchNorm, CnnModel, FcnnModel, TrainConfig,
                              TrainingDiverged, adam_step, batchnorm_forward, classify,
                              conv1d_forward, cross_entropy_loss, dense_forward, dropout,
                              gap, predict_positions, relu, softmax, train_classifier,
                              train_regressor)
from photonids.neural.layers import ShapeError
from oracles import conv_oracle


@pytest.mark.parametrize("padding", [0, 1, 2])
def test_conv1d_matches_nested_loops(rng, padding):
    for _ in range(20):
        cin, cout, length = rng.integers(1, 5), rng.integers(1, 5), rng.integers(3, 12)
        x = rng.normal(size=(cin, length))
        w = rng.normal(size=(cout, cin, 3))
        b = rng.normal(size=cout)
        assert np.max(np.abs(conv1d_forward(x, w, b, padding) - conv_oracle(x, w, b, padding))) <= 1e-12


def test_conv1d_shape_errors(rng):
    with pytest.raises(ShapeError):
        conv1d_forward(rng.normal(size=(2, 5)), rng.normal(size=(1, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv1d_forward(rng.normal(size=(3, 5)), rng.normal(size=(2, 3, 3)), np.zeros(3))


def test_conv1d_batched_layout(rng):
    x = rng.normal(size=(4, 2, 9))
    w, b = rng.normal(size=(3, 2, 3)), rng.normal(size=3)
    out = conv1d_forward(x, w, b)
    for i in range(4):
        np.testing.assert_allclose(out[i], conv_oracle(x[i], w, b, 1), atol=1e-12)


def test_batchnorm_train_normalizes_and_updates_running_stats(rng):
    x = rng.normal(3.0, 2.0, size=(64, 10, 4))
    rm, rv = np.zeros(4), np.ones(4)
    y = batchnorm_forward(x, np.ones(4), np.zeros(4), rm, rv, mode="train")
    np.testing.assert_allclose(y.mean(axis=(0, 1)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 1)), 1, atol=1e-3)
    n = 640
    np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 1)), atol=1e-12)
    np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 1)) * n / (n - 1), atol=1e-12)


def test_batchnorm_infer_uses_running_stats(rng):
    x = rng.normal(size=(5, 3))
    rm, rv = np.array([1.0, -1.0, 0.5]), np.array([4.0, 1.0, 0.25])
    g, b = np.array([2.0, 1.0, 0.5]), np.array([0.0, 1.0, -1.0])
    y = batchnorm_forward(x, g, b, rm.copy(), rv.copy(), mode="infer", eps=0.0)
    np.testing.assert_allclose(y, (x - rm) / np.sqrt(rv) * g + b, atol=1e-12)


def test_batchnorm_train_rejects_single_sample():
    with pytest.raises(ValueError):
        BatchNorm(2, dtype=np.float64).forward(np.ones((1, 2)), train=True)


def test_relu_gap_dense_softmax(rng):
    x = rng.normal(size=(3, 7))
    np.testing.assert_array_equal(relu(x), np.where(x > 0, x, 0))
    np.testing.assert_allclose(gap(x), x.mean(axis=1))
    w, b = rng.normal(size=(4, 7)), rng.normal(size=4)
    np.testing.assert_allclose(dense_forward(x, w, b), np.einsum("ij,kj->ik", x, w) + b, atol=1e-12)
    p = softmax(np.array([[1000.0, 1000.0], [0.0, np.log(3.0)]]))
    np.testing.assert_allclose(p, [[0.5, 0.5], [0.25, 0.75]], atol=1e-12)
    np.testing.assert_allclose(softmax(rng.normal(size=(5, 3))).sum(axis=1), 1, atol=1e-12)


def test_dropout_inverted_scaling(rng):
    x = np.ones((2000, 50))
    y = dropout(x, 0.2, np.random.default_rng(0), train=True)
    assert set(np.unique(y)) <= {0.0, 1.25}
    assert abs(y.mean() - 1.0) < 0.01
    np.testing.assert_array_equal(dropout(x, 0.2, np.random.default_rng(0), train=False), x)
    with pytest.raises(ValueError):
        dropout(x, 1.0, np.random.default_rng(0))


def test_cross_entropy_value():
    loss, _ = cross_entropy_loss(np.array([[0.0, np.log(3.0)]]), np.array([1]))
    assert loss == pytest.approx(-np.log(0.75), abs=1e-12)


def test_layer_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    worst = {}
    for _ in range(50):
        for name, layer, x in layer_cases(rng):
            worst[name] = max(worst.get(name, 0.0), check_layer(layer, x, rng))
        worst["losses"] = max(worst.get("losses", 0.0), check_losses(rng))
    assert all(v <= 1e-4 for v in worst.values()), worst


def test_batchnorm_infer_gradient():
    rng = np.random.default_rng(3)
    bn = BatchNorm(3, dtype=np.float64)
    bn.buffers["running_mean"][...] = rng.normal(size=3)
    bn.buffers["running_var"][...] = rng.uniform(0.5, 2, size=3)
    assert check_layer(bn, rng.normal(size=(4, 3)), rng, train=False) <= 1e-4


def test_adam_first_step_and_bias_correction():
    p = np.array([1.0, -2.0])
    g = np.array([0.5, -3.0])
    st = AdamState(np.zeros(2), np.zeros(2))
    adam_step(p, g, st, lr=0.1)
    # the first bias-corrected step is lr * sign(g), up to eps
    np.testing.assert_allclose(p, [0.9, -1.9], atol=1e-6)
    assert st.t == 1


def test_adam_minimizes_quadratic():
    p = np.array([5.0, -3.0])
    st = AdamState(np.zeros(2), np.zeros(2))
    for _ in range(2000):
        adam_step(p, 2 * p, st, lr=0.05)
    assert np.all(np.abs(p) < 1e-2)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        TrainConfig(lr_schedule="step")
    c = TrainConfig(1.0, 8, 10, lr_schedule="cosine")
    assert c.lr_at(0) == pytest.approx(1.0) and c.lr_at(5) == pytest.approx(0.5)


def test_cnn_shapes_and_parameter_count():
    m = CnnModel(seed=0)
    out = m.predict(np.zeros((3, 3981)))
    assert out.shape == (3, 4)
    # conv 1*64*3+64, bn 128, conv 64*32*3+32, bn 64, fc 32*128+128, fc 128*4+4
    assert m.net.theta.size == 256 + 128 + 6176 + 64 + 4224 + 516
    assert predict_positions(m, np.zeros(3981)).shape == (4,)


def test_fcnn_shapes_and_embed():
    m = FcnnModel(n_inputs=8, seed=1)
    z = np.random.default_rng(0).normal(size=(5, 8))
    p = m.predict_proba(z)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-6)
    assert m.embed(z).shape == (5, 32) and np.all(m.embed(z) >= 0)
    probs, label = classify(m, z[0])
    assert label == int(np.argmax(probs))


def test_same_seed_same_weights():
    np.testing.assert_array_equal(CnnModel(seed=4).net.theta, CnnModel(seed=4).net.theta)
    assert not np.array_equal(FcnnModel(seed=4).net.theta, FcnnModel(seed=5).net.theta)


def _toy_waveforms(n, rng):
    t = np.arange(400) * 0.025
    amp = rng.uniform(0.5, 2.0, n)
    w = amp[:, None] * np.exp(-((t - 5.0) ** 2)) + 0.01 * rng.normal(size=(n, 400))
    return w, np.stack([amp * 100, amp * 50, -amp * 30, amp * 10], axis=1)


def test_regressor_learns_amplitude_and_is_deterministic():
    rng = np.random.default_rng(0)
    w, y = _toy_waveforms(600, rng)
    cfg = TrainConfig(3e-3, 32, 15, seed=1)
    m, h = train_regressor(w, y, cfg, input_stride=4)
    assert h.train_loss[-1] < 0.3 * h.train_loss[0]
    m2, _ = train_regressor(w, y, cfg, input_stride=4)
    np.testing.assert_array_equal(m.net.theta, m2.net.theta)
    pred = m.destandardize(m.predict(w))
    r2 = 1 - np.mean((pred - y) ** 2, axis=0) / np.var(y, axis=0)
    assert np.all(r2 > 0.8)


def test_regressor_rejects_bad_targets():
    with pytest.raises(ValueError):
        train_regressor(np.zeros((0, 400)), np.zeros((0, 4)))
    with pytest.raises(ValueError):
        train_regressor(np.zeros((4, 400)), np.full((4, 4), np.nan))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_is_reported():
    w, y = _toy_waveforms(64, np.random.default_rng(0))
    with pytest.raises(TrainingDiverged):
        train_regressor(w, y * 1e30, TrainConfig(1e30, 16, 3, optimizer="sgd"), input_stride=4)


def test_classifier_early_stopping_restores_best():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(400, 4))
    y = (z[:, 0] + 0.5 * z[:, 1] > 0).astype(int)
    zv = rng.normal(size=(200, 4))
    yv = (zv[:, 0] + 0.5 * zv[:, 1] > 0).astype(int)
    cfg = TrainConfig(1e-2, 32, 200, seed=0, patience=5)
    m, h = train_classifier(z, y, cfg, zv, yv, standardize=True)
    assert h.epochs_run < 200
    assert h.epochs_run == h.best_epoch + 1 + 5
    acc = np.mean(np.argmax(m.predict_proba(zv), axis=1) == yv)
    assert acc > 0.9
    best_val = min(h.val_loss)
    loss, _ = cross_entropy_loss(m.logits(zv), yv)
    assert loss == pytest.approx(best_val, rel=1e-4)
