"""Denoising and up-sampling of captured events."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    window: int = 11
    order: int = 3
    factor: int = 20
    pre_samples: int = 8
    sample_period: float = 0.5


@dataclass
class ProcessedWaveform:
    samples: np.ndarray
    sample_period: float
    baseline: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_period


def _fit_row(offsets: np.ndarray, order: int, at: float) -> np.ndarray:
    """Weights that evaluate the LSQ polynomial through ``offsets`` at ``at``."""
    vander = np.vander(offsets.astype(float), order + 1, increasing=True)
    target = at ** np.arange(order + 1)
    return target @ np.linalg.pinv(vander)


@lru_cache(maxsize=32)
def savgol_matrix(n: int, window: int = 11, order: int = 3) -> np.ndarray:
    """Dense (n x n) Savitzky-Golay operator.

    Interior rows use the centred window. Near an edge the window is cut at
    the boundary (samples ``0 .. i + half`` for row ``i``) and the polynomial is
    fitted to that one-sided remainder, so no samples are invented.
    """
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if order >= window:
        raise ValueError("order must be smaller than window")
    if n < window:
        raise InsufficientSamples(f"need at least {window} samples, got {n}")
    half = window // 2
    offsets = np.arange(-half, half + 1)
    mat = np.zeros((n, n))
    centre = _fit_row(offsets, order, 0.0)
    for i in range(half, n - half):
        mat[i, i - half:i + half + 1] = centre
    for i in range(half):
        stop = max(i + half + 1, order + 1)
        row = _fit_row(np.arange(stop), order, float(i))
        mat[i, :stop] = row
        mat[n - 1 - i, n - stop:] = row[::-1]
    mat.setflags(write=False)
    return mat


def savgol_filter(samples, window: int = 11, order: int = 3) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.shape[-1] < window:
        raise InsufficientSamples(f"need at least {window} samples, got {x.shape[-1]}")
    return x @ savgol_matrix(x.shape[-1], window, order).T


@lru_cache(maxsize=8)
def spline_matrix(n: int, factor: int) -> np.ndarray:
    """Natural cubic spline evaluation as a linear map from n knots to the refined grid."""
    if n < 4:
        raise InsufficientSamples(f"cubic interpolation needs >= 4 samples, got {n}")
    knots = np.arange(n, dtype=float)
    fine = np.arange((n - 1) * factor + 1) / factor
    mat = CubicSpline(knots, np.eye(n), bc_type="natural", axis=0)(fine)
    # knot rows are exact unit vectors by construction
    mat[::factor] = np.eye(n)
    mat.setflags(write=False)
    return mat


def cubic_interpolate(samples, factor: int = 20) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    n = x.shape[-1]
    if n < 4:
        raise InsufficientSamples(f"cubic interpolation needs >= 4 samples, got {n}")
    if factor == 1:
        return x.copy()
    return x @ spline_matrix(n, factor).T


def preprocess_batch(samples, cfg: PreprocessConfig = PreprocessConfig()):
    """Baseline-subtract, smooth and up-sample a batch of raw events.

    Returns the up-sampled array (n, (L-1)*factor+1) and the per-event baselines.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    baseline = x[:, :cfg.pre_samples].mean(axis=1)
    smooth = savgol_filter(x - baseline[:, None], cfg.window, cfg.order)
    return cubic_interpolate(smooth, cfg.factor), baseline


def preprocess_event(samples, cfg: PreprocessConfig = PreprocessConfig()) -> ProcessedWaveform:
    x = np.asarray(getattr(samples, "samples", samples))
    if x.ndim != 1:
        raise ValueError("expected a single event")
    up, baseline = preprocess_batch(x[None, :], cfg)
    return ProcessedWaveform(up[0], cfg.sample_period / cfg.factor, float(baseline[0]))
