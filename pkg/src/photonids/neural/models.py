"""Model assemblies: the waveform regressor and the hybrid-feature classifier."""
from __future__ import annotations

import numpy as np

from .layers import (BatchNorm, Conv1d, Dense, Dropout, GlobalAvgPool, ReLU,
                     softmax)


class Sequential:
    """Layer stack whose trainable parameters live in one flat vector.

    ``theta`` and ``grad`` are contiguous; every layer parameter/gradient is a
    view into them, so optimisers update the whole model in one shot.
    """

    def __init__(self, layers, dtype=np.float32):
        self.layers = list(layers)
        self.dtype = dtype
        named = [(f"{i}.{k}", layer, k) for i, layer in enumerate(self.layers)
                 for k in layer.params]
        total = sum(layer.params[k].size for _, layer, k in named)
        self.theta = np.empty(total, dtype=dtype)
        self.grad = np.zeros(total, dtype=dtype)
        self.index = {}
        off = 0
        for name, layer, k in named:
            p = layer.params[k]
            view = self.theta[off:off + p.size].reshape(p.shape)
            view[...] = p
            layer.params[k] = view
            layer.grads[k] = self.grad[off:off + p.size].reshape(p.shape)
            self.index[name] = (off, p.shape)
            off += p.size

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def state(self) -> dict:
        """Named copies of parameters and buffers."""
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.params.items():
                out[f"{i}.{k}"] = v.copy()
            for k, v in layer.buffers.items():
                out[f"{i}.{k}"] = v.copy()
        return out

    def load_state(self, state: dict) -> None:
        for i, layer in enumerate(self.layers):
            for store in (layer.params, layer.buffers):
                for k in store:
                    src = np.asarray(state[f"{i}.{k}"])
                    if src.shape != store[k].shape:
                        raise ValueError(f"shape mismatch for {i}.{k}: {src.shape} vs {store[k].shape}")
                    store[k][...] = src


class CnnModel:
    """Conv(1->64)-BN-ReLU, Conv(64->32)-BN-ReLU, GAP, FC(32->128)-ReLU-Dropout, FC(128->4).

    The network is trained on z-scored targets; ``forward``/``predict`` return
    that standardized output and ``destandardize`` maps it back to target units.
    """

    kind = "cnn"

    def __init__(self, seed: int = 0, dropout_p: float = 0.2, n_outputs: int = 4,
                 dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.dropout = Dropout(dropout_p, np.random.default_rng(seed + 1))
        self.net = Sequential([
            Conv1d(1, 64, 3, 1, rng, dtype), BatchNorm(64, dtype=dtype), ReLU(),
            Conv1d(64, 32, 3, 1, rng, dtype), BatchNorm(32, dtype=dtype), ReLU(),
            GlobalAvgPool(),
            Dense(32, 128, rng, dtype), ReLU(), self.dropout,
            Dense(128, n_outputs, rng, dtype),
        ], dtype)
        self.input_scale = np.ones(1, dtype=dtype)
        self.target_mean = np.zeros(n_outputs, dtype=dtype)
        self.target_std = np.ones(n_outputs, dtype=dtype)
        self.input_stride = 40

    def decimate(self, waveforms) -> np.ndarray:
        return np.atleast_2d(np.asarray(waveforms))[:, ::self.input_stride]

    def prepare(self, waveforms, decimated: bool = False) -> np.ndarray:
        """Decimate processed waveforms and scale them into a (B, L, 1) tensor."""
        x = np.atleast_2d(np.asarray(waveforms)) if decimated else self.decimate(waveforms)
        return (x * self.input_scale[0]).astype(self.net.dtype)[:, :, None]

    def forward(self, x, train=False):
        return self.net.forward(x, train)

    def predict(self, waveforms, batch: int = 512, decimated: bool = False) -> np.ndarray:
        """Raw (standardized-scale) position predictions, inference mode."""
        x = self.prepare(waveforms, decimated)
        return np.concatenate([self.forward(x[i:i + batch]) for i in range(0, len(x), batch)]
                              ).astype(float)

    def destandardize(self, p):
        return np.asarray(p) * self.target_std.astype(float) + self.target_mean.astype(float)

    def extras(self) -> dict:
        return {"input_scale": self.input_scale, "target_mean": self.target_mean,
                "target_std": self.target_std,
                "input_stride": np.array([self.input_stride], dtype=np.float32),
                "dropout_p": np.array([self.dropout.p], dtype=np.float32)}

    def load_extras(self, d: dict) -> None:
        self.input_scale = np.asarray(d["input_scale"], dtype=self.net.dtype)
        self.target_mean = np.asarray(d["target_mean"], dtype=self.net.dtype)
        self.target_std = np.asarray(d["target_std"], dtype=self.net.dtype)
        self.input_stride = int(np.asarray(d["input_stride"])[0])
        self.dropout.p = float(np.asarray(d["dropout_p"])[0])


class FcnnModel:
    """Dense n_in->256->128->64->32->2 with ReLU; softmax over the two classes."""

    kind = "fcnn"
    HIDDEN = (256, 128, 64, 32)

    def __init__(self, n_inputs: int = 8, seed: int = 0, n_classes: int = 2,
                 dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.seed = seed
        sizes = (n_inputs,) + self.HIDDEN
        layers = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            layers += [Dense(a, b, rng, dtype), ReLU()]
        layers.append(Dense(sizes[-1], n_classes, rng, dtype))
        self.net = Sequential(layers, dtype)
        self.input_mean = np.zeros(n_inputs, dtype=dtype)
        self.input_std = np.ones(n_inputs, dtype=dtype)

    @property
    def n_inputs(self) -> int:
        return self.input_mean.size

    def prepare(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return ((z - self.input_mean) / self.input_std).astype(self.net.dtype)

    def forward(self, x, train=False):
        return self.net.forward(x, train)

    def logits(self, z) -> np.ndarray:
        return self.forward(self.prepare(z)).astype(float)

    def predict_proba(self, z) -> np.ndarray:
        return softmax(self.logits(z))

    def embed(self, z) -> np.ndarray:
        """Penultimate (32-d, post-ReLU) activations."""
        x = self.prepare(z)
        for layer in self.net.layers[:-1]:
            x = layer.forward(x)
        return x.astype(float)

    def extras(self) -> dict:
        return {"input_mean": self.input_mean, "input_std": self.input_std}

    def load_extras(self, d: dict) -> None:
        self.input_mean = np.asarray(d["input_mean"], dtype=self.net.dtype)
        self.input_std = np.asarray(d["input_std"], dtype=self.net.dtype)


def predict_positions(model: CnnModel, w) -> np.ndarray:
    """Raw pseudo-position vector for one processed waveform."""
    samples = getattr(w, "samples", w)
    return model.predict(np.asarray(samples)[None, :])[0]


def classify(model: FcnnModel, z):
    """(probabilities, label) for one hybrid feature vector; label 1 is photon."""
    probs = model.predict_proba(np.asarray(z)[None, :])[0]
    return probs, int(np.argmax(probs))
