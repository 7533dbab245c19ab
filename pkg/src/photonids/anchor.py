"""KDE-anchored pseudo-position ruler.

Each scalar feature is anchored at the mode of its Gaussian KDE over the
training fold; the ruler is the observed range divided by a constant F, so
``p = (v - mode) / ruler`` is a dimensionless coordinate.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .features import FEATURE_NAMES

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DegenerateFeature(ValueError):
    def __init__(self, name):
        super().__init__(f"feature {name!r} has no spread (max == min)")
        self.feature = name


def _check(samples, h):
    v = np.asarray(samples, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("KDE needs at least one sample")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    return v


def kde_density(samples, h: float, t, chunk: int = 1 << 22):
    """Gaussian KDE evaluated at ``t`` (scalar or array)."""
    v = _check(samples, h)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape)
    flat_t, flat_out = t_arr.ravel(), out.reshape(-1)
    step = max(1, chunk // v.size)
    for s in range(0, flat_t.size, step):
        u = (flat_t[s:s + step, None] - v[None, :]) / h
        flat_out[s:s + step] = np.exp(-0.5 * u * u).sum(axis=1)
    out /= v.size * h * _SQRT_2PI
    return out if np.ndim(t) else float(out[0])


def mode_grid(samples, h: float, grid_points: int = 2048) -> np.ndarray:
    v = _check(samples, h)
    return np.linspace(v.min() - 3 * h, v.max() + 3 * h, grid_points)


def kde_mode(samples, h: float, grid_points: int = 2048) -> float:
    """Grid argmax of the KDE; ties resolve to the smallest grid value."""
    grid = mode_grid(samples, h, grid_points)
    return float(grid[int(np.argmax(kde_density(samples, h, grid)))])


def scott_bandwidth(samples) -> float:
    v = np.asarray(samples, dtype=float).ravel()
    return float(np.std(v, ddof=1) * v.size ** (-1 / 5))


@dataclass(frozen=True)
class FeatureAnchor:
    mu: float
    delta: float
    h: float
    min: float
    max: float


@dataclass(frozen=True)
class AnchorModel:
    anchors: dict  # feature name -> FeatureAnchor
    F: float

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.anchors[k].mu for k in FEATURE_NAMES])

    @property
    def delta(self) -> np.ndarray:
        return np.array([self.anchors[k].delta for k in FEATURE_NAMES])

    def to_json(self) -> str:
        body = {k: asdict(self.anchors[k]) for k in FEATURE_NAMES}
        return json.dumps({"F": self.F, "features": body}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AnchorModel":
        d = json.loads(text)
        anchors = {k: FeatureAnchor(**d["features"][k]) for k in FEATURE_NAMES}
        return cls(anchors, float(d["F"]))


def fit_anchor(features, F: float = 1000.0, grid_points: int = 2048,
               bandwidth: str | float = "scott") -> AnchorModel:
    """Fit the ruler on an (n, 4) feature table from the training fold."""
    if not F > 0:
        raise ValueError("F must be positive")
    v = np.asarray(features, dtype=float)
    if v.ndim != 2 or v.shape[1] != len(FEATURE_NAMES):
        raise ValueError("expected an (n, 4) feature table")
    anchors = {}
    for k, name in enumerate(FEATURE_NAMES):
        col = v[:, k]
        lo, hi = float(col.min()), float(col.max())
        if not hi > lo:
            raise DegenerateFeature(name)
        h = scott_bandwidth(col) if bandwidth == "scott" else float(bandwidth)
        anchors[name] = FeatureAnchor(mu=kde_mode(col, h, grid_points), delta=(hi - lo) / F,
                                      h=h, min=lo, max=hi)
    return AnchorModel(anchors, float(F))


def encode_position(v, a: AnchorModel) -> np.ndarray:
    """Pseudo-positions for one feature vector or an (n, 4) table."""
    if hasattr(v, "as_array"):
        v = v.as_array()
    return (np.asarray(v, dtype=float) - a.mu) / a.delta
