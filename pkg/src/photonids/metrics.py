"""Regression, classification, cluster-separation and stream-SNR metrics."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

CLASS_NAMES = ("dark", "photon")


@dataclass(frozen=True)
class ChannelRegression:
    mae: float
    rmse: float
    r_squared: float | None  # None when the target has zero variance
    tolerance_accuracy: float


@dataclass(frozen=True)
class RegressionReport:
    channels: dict  # name -> ChannelRegression
    tau: float

    def to_dict(self):
        return {"tau": self.tau, "channels": {k: asdict(v) for k, v in self.channels.items()}}

    def to_text(self) -> str:
        lines = [f"tolerance tau = {self.tau:g}",
                 f"{'channel':<10}{'MAE':>14}{'RMSE':>14}{'R2':>12}{'tol-acc':>10}"]
        for k, c in self.channels.items():
            r2 = "undefined" if c.r_squared is None else f"{c.r_squared:.6f}"
            lines.append(f"{k:<10}{c.mae:>14.4f}{c.rmse:>14.4f}{r2:>12}{c.tolerance_accuracy:>10.4f}")
        return "\n".join(lines)


def channel_regression(pred, target, tau: float) -> ChannelRegression:
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if pred.size == 0 or pred.shape != target.shape:
        raise ValueError("pred and target must be non-empty and equally long")
    err = pred - target
    sse = float(np.sum(err ** 2))
    sst = float(np.sum((target - target.mean()) ** 2))
    return ChannelRegression(
        mae=float(np.mean(np.abs(err))),
        rmse=math.sqrt(sse / err.size),
        r_squared=None if sst == 0 else 1.0 - sse / sst,
        tolerance_accuracy=float(np.mean(np.abs(err) <= tau)),
    )


def regression_metrics(pred, target, tau: float = 50.0, names=None) -> RegressionReport:
    """Per-column metrics for (n,) or (n, k) predictions."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.ndim == 1:
        pred, target = pred[:, None], target[:, None]
    names = names or [f"ch{k}" for k in range(pred.shape[1])]
    return RegressionReport({n: channel_regression(pred[:, k], target[:, k], tau)
                             for k, n in enumerate(names)}, float(tau))


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: tuple
    recall: tuple
    f1: tuple
    roc_auc: float | None
    confusion: tuple  # counts, rows = actual, cols = predicted (dark, photon)

    @property
    def confusion_normalized(self):
        c = np.asarray(self.confusion, dtype=float)
        rows = c.sum(axis=1, keepdims=True)
        return np.divide(c, rows, out=np.zeros_like(c), where=rows > 0)

    def to_dict(self):
        d = asdict(self)
        d["confusion_normalized"] = self.confusion_normalized.tolist()
        d["classes"] = list(CLASS_NAMES)
        return d

    def to_text(self) -> str:
        lines = [f"accuracy {self.accuracy:.4f}   roc_auc "
                 + ("n/a" if self.roc_auc is None else f"{self.roc_auc:.4f}"),
                 f"{'class':<8}{'precision':>10}{'recall':>10}{'f1':>10}"]
        for i, name in enumerate(CLASS_NAMES):
            lines.append(f"{name:<8}{self.precision[i]:>10.4f}{self.recall[i]:>10.4f}{self.f1[i]:>10.4f}")
        cn = self.confusion_normalized
        lines.append("confusion (row-normalized, rows=actual): "
                     + "; ".join(" ".join(f"{v:.4f}" for v in row) for row in cn))
        return "\n".join(lines)

    def confusion_csv(self) -> str:
        rows = ["actual,pred_dark,pred_photon"]
        for name, row in zip(CLASS_NAMES, self.confusion):
            rows.append(f"{name},{row[0]},{row[1]}")
        return "\n".join(rows) + "\n"


def confusion_matrix(labels, predictions, n_classes: int = 2) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    c = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(c, (labels, predictions), 1)
    return c


def _safe_div(a, b):
    return float(a / b) if b else 0.0


def classification_metrics(labels, predictions, scores=None) -> ClassificationReport:
    """Binary report; ``scores`` (photon-class scores) enable ROC-AUC."""
    c = confusion_matrix(labels, predictions)
    precision, recall, f1 = [], [], []
    for k in range(2):
        tp = c[k, k]
        p = _safe_div(tp, c[:, k].sum())
        r = _safe_div(tp, c[k, :].sum())
        precision.append(p)
        recall.append(r)
        f1.append(_safe_div(2 * p * r, p + r))
    auc = None
    if scores is not None and len(np.unique(labels)) == 2:
        auc = roc_auc(scores, labels)
    return ClassificationReport(
        accuracy=_safe_div(np.trace(c), c.sum()), precision=tuple(precision),
        recall=tuple(recall), f1=tuple(f1), roc_auc=auc,
        confusion=tuple(tuple(int(v) for v in row) for row in c))


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def silhouette(points, labels, chunk: int = 1024) -> float:
    """Mean silhouette coefficient with Euclidean distances; singletons score 0."""
    x = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    classes, inverse = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    counts = np.bincount(inverse)
    sums = np.zeros((x.shape[0], classes.size))
    for s in range(0, x.shape[0], chunk):
        d = cdist(x[s:s + chunk], x)
        for c in range(classes.size):
            sums[s:s + chunk, c] = d[:, inverse == c].sum(axis=1)
    own = counts[inverse]
    idx = np.arange(x.shape[0])
    a = np.divide(sums[idx, inverse], own - 1, out=np.zeros(x.shape[0]), where=own > 1)
    mean_other = sums / counts
    mean_other[idx, inverse] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s_val = np.divide(b - a, denom, out=np.zeros_like(a), where=denom > 0)
    s_val[own == 1] = 0.0
    return float(s_val.mean())


@dataclass(frozen=True)
class SnrReport:
    S: float
    B: float
    tpr: float
    fpr: float
    snr: float
    snr_db: float
    gain: float  # math.inf when fpr == 0
    snr_prime: float | None  # undefined when fpr == 0
    snr_prime_db: float | None

    def to_dict(self):
        d = asdict(self)
        if math.isinf(self.gain):
            d["gain"] = "inf"
        return d

    @property
    def gain_db(self) -> float:
        return 10 * math.log10(self.gain) if self.gain > 0 else -math.inf


def to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)


def snr_gain(S: float, B: float, tpr: float, fpr: float) -> SnrReport:
    """Stream SNR before and after gating by a classifier with rates (tpr, fpr)."""
    if not (S > 0 and B > 0):
        raise ValueError("rates S and B must be positive")
    if not (0 <= tpr <= 1 and 0 <= fpr <= 1):
        raise ValueError("tpr and fpr must lie in [0, 1]")
    snr = S / B
    if fpr == 0:
        return SnrReport(S, B, tpr, fpr, snr, to_db(snr), math.inf, None, None)
    gain = tpr / fpr
    snr_p = (tpr * S) / (fpr * B)
    return SnrReport(S, B, tpr, fpr, snr, to_db(snr), gain, snr_p,
                     to_db(snr_p) if snr_p > 0 else -math.inf)


def snr_table(S, backgrounds, tpr, fpr):
    return [snr_gain(S, B, tpr, fpr) for B in backgrounds]


def snr_table_text(reports) -> str:
    lines = [f"{'S [1/s]':>10}{'B [1/s]':>10}{'SNR':>10}{'SNR[dB]':>10}{'SNR_p':>10}{'SNR_p[dB]':>11}{'G':>8}"]
    for r in reports:
        lines.append(f"{r.S:>10g}{r.B:>10g}{r.snr:>10.2f}{r.snr_db:>10.2f}"
                     + (f"{r.snr_prime:>10.2f}{r.snr_prime_db:>11.2f}{r.gain:>8.2f}"
                        if r.snr_prime is not None else f"{'undef':>10}{'undef':>11}{'inf':>8}"))
    return "\n".join(lines)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))
