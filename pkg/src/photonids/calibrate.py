"""Per-channel monotone PCHIP calibration of raw regressor outputs."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class NonMonotoneKnots(ValueError):
    pass


def fritsch_carlson_slopes(t, u) -> np.ndarray:
    """Hermite slopes that keep the cubic interpolant monotone on every interval.

    Starts from averaged secants (zero at local extrema of the secant sequence,
    one-sided at the ends) and shrinks any interval whose slope ratios leave
    the circle of radius 3.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if t.size < 2 or t.shape != u.shape:
        raise ValueError("need at least two knots with matching shapes")
    if np.any(np.diff(t) <= 0):
        raise ValueError("knot abscissae must be strictly increasing")
    if np.any(np.diff(u) < 0):
        raise NonMonotoneKnots("knot values must be non-decreasing")
    delta = np.diff(u) / np.diff(t)
    m = np.empty_like(u)
    m[0], m[-1] = delta[0], delta[-1]
    inner = 0.5 * (delta[:-1] + delta[1:])
    m[1:-1] = np.where((delta[:-1] > 0) & (delta[1:] > 0), inner, 0.0)
    for k, d in enumerate(delta):
        if d == 0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / d, m[k + 1] / d
        r2 = a * a + b * b
        if r2 > 9.0:
            tau = 3.0 / np.sqrt(r2)
            m[k], m[k + 1] = tau * a * d, tau * b * d
    return m


def hermite_eval(t, u, m, x, left_slope=None, right_slope=None):
    """Evaluate the cubic Hermite interpolant with linear extension outside the knots."""
    t, u, m = (np.asarray(a, dtype=float) for a in (t, u, m))
    x = np.asarray(x, dtype=float)
    ls = m[0] if left_slope is None else left_slope
    rs = m[-1] if right_slope is None else right_slope
    k = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
    h = t[k + 1] - t[k]
    s = (x - t[k]) / h
    s2, s3 = s * s, s * s * s
    h01 = 3 * s2 - 2 * s3
    h10 = s3 - 2 * s2 + s
    h11 = s3 - s2
    # anchored at the left knot so flat intervals stay exactly flat
    out = u[k] + (u[k + 1] - u[k]) * h01 + h * (m[k] * h10 + m[k + 1] * h11)
    out = np.where(x < t[0], u[0] + ls * (x - t[0]), out)
    out = np.where(x >= t[-1], u[-1] + rs * (x - t[-1]), out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChannelCalibrator:
    t: np.ndarray
    u: np.ndarray
    slopes: np.ndarray
    left_slope: float
    right_slope: float

    def __call__(self, x):
        return hermite_eval(self.t, self.u, self.slopes, x, self.left_slope, self.right_slope)


@dataclass(frozen=True)
class CalibratorModel:
    channels: tuple  # of ChannelCalibrator

    def to_json(self) -> str:
        body = [{"t": c.t.tolist(), "u": c.u.tolist(), "slopes": c.slopes.tolist(),
                 "extrapolation": [c.left_slope, c.right_slope]} for c in self.channels]
        return json.dumps({"channels": body})

    @classmethod
    def from_json(cls, text: str) -> "CalibratorModel":
        chans = []
        for c in json.loads(text)["channels"]:
            chans.append(ChannelCalibrator(np.array(c["t"]), np.array(c["u"]), np.array(c["slopes"]),
                                           float(c["extrapolation"][0]), float(c["extrapolation"][1])))
        return cls(tuple(chans))


def make_channel(t, u) -> ChannelCalibrator:
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    m = fritsch_carlson_slopes(t, u)
    return ChannelCalibrator(t, u, m, float(m[0]), float(m[-1]))


def pchip_eval(cal: CalibratorModel, channel: int, t):
    return cal.channels[channel](t)


def pool_adjacent_violators(y, w=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, lens = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        lens.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            wsum = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / wsum
            n = lens[-2] + lens[-1]
            del vals[-1], wts[-1], lens[-1]
            vals[-1], wts[-1], lens[-1] = v, wsum, n
    return np.repeat(vals, lens)


def _channel_knots(raw, target, bins):
    order = np.argsort(raw, kind="stable")
    raw, target = raw[order], target[order]
    t, u, w = [], [], []
    for chunk in np.array_split(np.arange(raw.size), bins):
        tm, um = raw[chunk].mean(), target[chunk].mean()
        if t and tm <= t[-1]:
            # tied raw values across bins: merge into the previous knot
            n0 = w[-1]
            t[-1] = (t[-1] * n0 + tm * chunk.size) / (n0 + chunk.size)
            u[-1] = (u[-1] * n0 + um * chunk.size) / (n0 + chunk.size)
            w[-1] = n0 + chunk.size
        else:
            t.append(tm)
            u.append(um)
            w.append(chunk.size)
    t, u = np.array(t), pool_adjacent_violators(u, w)
    if t.size < 2:
        raise ValueError("raw predictions collapse to fewer than two distinct knots")
    return t, u


def fit_calibrator(raw, target, bins: int = 50) -> CalibratorModel:
    """Fit one monotone map per column of ``raw`` -> ``target`` (both (n, k))."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if raw.shape != target.shape:
        raise ValueError("raw and target must have the same shape")
    if raw.shape[0] < 2 * bins:
        raise ValueError(f"need at least {2 * bins} pairs per channel, got {raw.shape[0]}")
    chans = tuple(make_channel(*_channel_knots(raw[:, k], target[:, k], bins))
                  for k in range(raw.shape[1]))
    return CalibratorModel(chans)


def apply_calibration(cal: CalibratorModel, p_raw) -> np.ndarray:
    p = np.asarray(p_raw, dtype=float)
    cols = [cal.channels[k](p[..., k]) for k in range(len(cal.channels))]
    return np.stack(cols, axis=-1)
