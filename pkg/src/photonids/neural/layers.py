"""Layers with explicit forward/backward passes.

Layouts: inside models, sequence tensors are channels-last (batch, length,
channels) so convolutions reduce to one matmul; dense tensors are (batch,
features). The functional helpers accept the conventional (C, L) layout.
Each layer caches what its backward pass needs during the last ``forward``
call.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class Layer:
    params: dict
    grads: dict
    buffers: dict

    def __init__(self):
        self.params, self.grads, self.buffers = {}, {}, {}

    def forward(self, x, train: bool = False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


def uniform_fan_in(rng, shape, fan_in, dtype=np.float32):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def conv1d_forward(x, weight, bias, padding: int = 1):
    """Cross-correlation with zero padding.

    x is (Cin, L) or (B, Cin, L); weight (Cout, Cin, K); output keeps that layout.
    """
    x = np.asarray(x)
    if x.ndim == 2:
        return conv1d_forward(x[None], weight, bias, padding)[0]
    cout, wcin, k = weight.shape
    if x.ndim != 3 or wcin != x.shape[1] or np.shape(bias) != (cout,):
        raise ShapeError(f"input {x.shape}, weight {weight.shape}, bias {np.shape(bias)}")
    conv = Conv1d.__new__(Conv1d)
    Layer.__init__(conv)
    conv.padding = padding
    conv.params["weight"], conv.params["bias"] = np.asarray(weight), np.asarray(bias)
    return conv.forward(x.transpose(0, 2, 1)).transpose(0, 2, 1)


def _im2col(x, k, padding):
    """(B, L, C) -> (B, Lout, K*C) with column index j*C + c."""
    xp = np.pad(x, ((0, 0), (padding, padding), (0, 0))) if padding else x
    lout = xp.shape[1] - k + 1
    return np.concatenate([xp[:, j:j + lout, :] for j in range(k)], axis=2)


class Conv1d(Layer):
    """1-D convolution on channels-last tensors (B, L, C).

    Weights keep the conventional (Cout, Cin, K) layout.
    """

    def __init__(self, cin, cout, kernel=3, padding=1, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        fan_in = cin * kernel
        self.padding = padding
        self.params["weight"] = uniform_fan_in(rng, (cout, cin, kernel), fan_in, dtype)
        self.params["bias"] = uniform_fan_in(rng, (cout,), fan_in, dtype)

    def _wmat(self):
        w = self.params["weight"]
        return w.transpose(0, 2, 1).reshape(w.shape[0], -1)  # (Cout, K*Cin)

    def forward(self, x, train=False):
        cout, cin, k = self.params["weight"].shape
        if x.ndim != 3 or x.shape[2] != cin:
            raise ShapeError(f"Conv1d expects (B, L, {cin}), got {x.shape}")
        cols = _im2col(x, k, self.padding)
        self._cache = (cols, x.shape)
        return cols @ self._wmat().T + self.params["bias"]

    def backward(self, dout):
        cols, (b, length, cin) = self._cache
        cout, _, k = self.params["weight"].shape
        d2 = dout.reshape(-1, cout)
        gw = d2.T @ cols.reshape(-1, k * cin)  # (Cout, K*Cin)
        self.grads["weight"][...] = gw.reshape(cout, k, cin).transpose(0, 2, 1)
        self.grads["bias"][...] = d2.sum(axis=0)
        dcols = dout @ self._wmat()  # (B, Lout, K*Cin)
        p = self.padding
        dxp = np.zeros((b, length + 2 * p, cin), dtype=dout.dtype)
        lout = dcols.shape[1]
        for j in range(k):
            dxp[:, j:j + lout, :] += dcols[:, :, j * cin:(j + 1) * cin]
        return dxp[:, p:p + length, :] if p else dxp


class BatchNorm(Layer):
    """Per-channel batch normalisation over all but the last (channel) axis."""

    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    @staticmethod
    def _axes(x):
        return tuple(range(x.ndim - 1))

    def forward(self, x, train=False):
        axes = self._axes(x)
        if train:
            n = x.size // x.shape[-1]
            if x.shape[0] < 2:
                raise ValueError("training-mode batch norm needs a batch of at least 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            rm[...] = (1 - m) * rm + m * mean
            rv[...] = (1 - m) * rv + m * var * (n / max(n - 1, 1))
        else:
            mean, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, train)
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, dout):
        xhat, inv, train = self._cache
        axes = self._axes(dout)
        self.grads["gamma"][...] = (dout * xhat).sum(axis=axes)
        self.grads["beta"][...] = dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"]
        if not train:
            return dxhat * inv
        n = dout.size // dout.shape[-1]
        s1 = dxhat.sum(axis=axes)
        s2 = (dxhat * xhat).sum(axis=axes)
        return (inv / n) * (
            n * dxhat - s1 - xhat * s2)


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode="infer",
                      momentum=0.1, eps=1e-5):
    """Functional batch norm; updates the running arrays in place in train mode."""
    bn = BatchNorm(len(gamma), momentum, eps, dtype=np.asarray(gamma).dtype)
    bn.params["gamma"], bn.params["beta"] = np.asarray(gamma), np.asarray(beta)
    bn.buffers["running_mean"], bn.buffers["running_var"] = running_mean, running_var
    return bn.forward(np.asarray(x), train=(mode == "train"))


class ReLU(Layer):
    def forward(self, x, train=False):
        self._out = np.maximum(x, 0)
        return self._out

    def backward(self, dout):
        return np.where(self._out > 0, dout, 0).astype(dout.dtype, copy=False)


def relu(x):
    return np.maximum(x, 0)


class GlobalAvgPool(Layer):
    """Mean over the time axis of a channels-last (B, L, C) tensor."""

    def forward(self, x, train=False):
        self._length = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dout):
        return np.broadcast_to((dout / self._length)[:, None, :],
                               (dout.shape[0], self._length, dout.shape[1]))


def gap(x):
    """Per-channel temporal mean of a (C, L) or (B, C, L) tensor."""
    return np.asarray(x).mean(axis=-1)


class Dense(Layer):
    def __init__(self, nin, nout, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.params["weight"] = uniform_fan_in(rng, (nout, nin), nin, dtype)
        self.params["bias"] = uniform_fan_in(rng, (nout,), nin, dtype)

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.params["weight"].shape[1]:
            raise ShapeError(f"Dense expects (B, {self.params['weight'].shape[1]}), got {x.shape}")
        self._x = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dout):
        self.grads["weight"][...] = dout.T @ self._x
        self.grads["bias"][...] = dout.sum(axis=0)
        return dout @ self.params["weight"]


def dense_forward(x, weight, bias):
    return np.asarray(x) @ np.asarray(weight).T + bias


class Dropout(Layer):
    """Inverted dropout; the mask generator is owned by the layer for reproducibility."""

    def __init__(self, p=0.2, rng=None):
        super().__init__()
        if not 0 <= p < 1:
            raise ValueError("dropout probability must lie in [0, 1)")
        self.p = p
        self.rng = rng or np.random.default_rng(0)

    def forward(self, x, train=False):
        if not train or self.p == 0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask


def dropout(x, p, rng, train=True):
    return Dropout(p, rng).forward(np.asarray(x), train)


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis=-1):
    z = np.asarray(logits)
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def cross_entropy_loss(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    lsm = log_softmax(logits)
    loss = -lsm[np.arange(n), labels].mean()
    grad = np.exp(lsm)
    grad[np.arange(n), labels] -= 1
    return float(loss), (grad / n).astype(logits.dtype, copy=False)


def mse_loss(pred, target):
    """Mean over samples of the squared L2 error, with gradient w.r.t. ``pred``."""
    pred = np.asarray(pred)
    diff = pred - np.asarray(target, dtype=pred.dtype)
    n = pred.shape[0]
    return float((diff.astype(float) ** 2).sum() / n), (2.0 / n) * diff
