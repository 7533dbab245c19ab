"""Training loops for the regressor and the classifier."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .layers import cross_entropy_loss, mse_loss
from .models import CnnModel, FcnnModel
from .optim import Optimizer

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    optimizer: str = "adam"
    patience: int | None = None  # early stopping on validation loss
    lr_schedule: str = "constant"  # or "cosine": anneal to zero over the epoch budget

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == "cosine":
            return 0.5 * self.learning_rate * (1 + np.cos(np.pi * epoch / self.epochs))
        return self.learning_rate


REGRESSOR_DEFAULTS = TrainConfig(5e-4, 64, 50, 0)
CLASSIFIER_DEFAULTS = TrainConfig(1e-4, 32, 300, 0, patience=20)


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        idx = order[s:s + batch_size]
        # a trailing batch of one cannot feed training-mode batch norm
        if idx.size < 2 and s > 0:
            continue
        yield idx


def _check_finite(loss, epoch, step, model_name):
    if not np.isfinite(loss):
        raise TrainingDiverged(f"{model_name}: non-finite loss {loss} at epoch {epoch}, step {step}")


def train_regressor(waveforms, targets, cfg: TrainConfig = REGRESSOR_DEFAULTS,
                    input_stride: int = 40, dropout_p: float = 0.2, decimated: bool = False):
    """Fit the CNN to pseudo-position targets; returns (model, history).

    ``waveforms`` are processed (up-sampled) events, or already decimated by
    ``input_stride`` when ``decimated`` is set; ``targets`` is an (n, 4) array.
    """
    targets = np.asarray(targets, dtype=float)
    if len(waveforms) == 0:
        raise ValueError("empty training split")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    model = CnnModel(seed=cfg.seed, dropout_p=dropout_p, n_outputs=targets.shape[1])
    model.input_stride = input_stride
    dec = np.asarray(waveforms) if decimated else model.decimate(waveforms)
    model.input_scale = np.array([1.0 / max(float(np.std(dec)), 1e-12)], dtype=np.float32)
    mean, std = targets.mean(axis=0), targets.std(axis=0)
    std[std == 0] = 1.0
    model.target_mean = mean.astype(np.float32)
    model.target_std = std.astype(np.float32)
    x = model.prepare(dec, decimated=True)
    y = ((targets - model.target_mean.astype(float)) / model.target_std.astype(float)).astype(np.float32)

    opt = Optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 2)
    hist = History()
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        total, count = 0.0, 0
        for step, idx in enumerate(_batches(len(x), cfg.batch_size, rng)):
            out = model.forward(x[idx], train=True)
            loss, dout = mse_loss(out, y[idx])
            _check_finite(loss, epoch, step, "regressor")
            model.net.grad[...] = 0
            model.net.backward(dout)
            opt.step(model.net.theta, model.net.grad)
            total += loss * idx.size
            count += idx.size
        hist.train_loss.append(total / count)
        log.info("regressor epoch %d/%d mse %.5f", epoch + 1, cfg.epochs, hist.train_loss[-1])
    return model, hist


def _ce_eval(model, x, y, batch=4096):
    total = 0.0
    for s in range(0, len(x), batch):
        loss, _ = cross_entropy_loss(model.forward(x[s:s + batch]), y[s:s + batch])
        total += loss * len(x[s:s + batch])
    return total / len(x)


def train_classifier(z, labels, cfg: TrainConfig = CLASSIFIER_DEFAULTS, z_val=None,
                     labels_val=None, standardize: bool = False):
    """Cross-entropy training with optional early stopping; returns (model, history).

    With validation data and ``cfg.patience`` set, training stops after that many
    epochs without a validation-loss improvement and the best weights are kept.
    """
    z = np.asarray(z, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    model = FcnnModel(n_inputs=z.shape[1], seed=cfg.seed)
    if standardize:
        mean, std = z.mean(axis=0), z.std(axis=0)
        std[std == 0] = 1.0
        model.input_mean = mean.astype(np.float32)
        model.input_std = std.astype(np.float32)
    x = model.prepare(z)
    has_val = z_val is not None and labels_val is not None
    if has_val:
        xv, yv = model.prepare(z_val), np.asarray(labels_val, dtype=np.int64)

    opt = Optimizer(cfg.optimizer, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 2)
    hist = History()
    best, best_theta, stale = np.inf, None, 0
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        total = 0.0
        for step, idx in enumerate(_batches(len(x), cfg.batch_size, rng)):
            out = model.forward(x[idx], train=True)
            loss, dout = cross_entropy_loss(out, labels[idx])
            _check_finite(loss, epoch, step, "classifier")
            model.net.grad[...] = 0
            model.net.backward(dout)
            opt.step(model.net.theta, model.net.grad)
            total += loss * idx.size
        hist.train_loss.append(total / len(x))
        if has_val:
            vl = _ce_eval(model, xv, yv)
            hist.val_loss.append(vl)
            if vl < best:
                best, best_theta, stale = vl, model.net.theta.copy(), 0
                hist.best_epoch = epoch
            else:
                stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                log.info("classifier early stop at epoch %d (best %d)", epoch + 1, hist.best_epoch + 1)
                break
    if best_theta is not None:
        model.net.theta[...] = best_theta
    return model, hist
