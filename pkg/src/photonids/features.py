"""Scalar pulse-morphology features: peak, 10-90 rise, 90-10 fall, FWHM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_NAMES = ("peak", "rise", "fall", "fwhm")


class NoPulse(ValueError):
    pass


class TruncatedPulse(ValueError):
    def __init__(self, edge: str, level: float):
        super().__init__(f"waveform never crosses {level:g} of peak on the {edge} edge")
        self.edge = edge
        self.level = level


@dataclass(frozen=True)
class ScalarFeatures:
    peak_amplitude: float
    rising_time: float
    falling_time: float
    fwhm_time: float

    def as_array(self) -> np.ndarray:
        return np.array([self.peak_amplitude, self.rising_time, self.falling_time, self.fwhm_time])

    @classmethod
    def from_array(cls, a) -> "ScalarFeatures":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class Thresholds:
    low: float = 0.1
    high: float = 0.9
    half: float = 0.5


def _leading(y: np.ndarray, ipk: int, level: float) -> float | None:
    """Fractional index of the nearest up-crossing of ``level`` before the peak."""
    below = np.flatnonzero(y[:ipk + 1] < level)
    if below.size == 0:
        return None
    i = below[-1]
    return i + (level - y[i]) / (y[i + 1] - y[i])


def _trailing(y: np.ndarray, ipk: int, level: float) -> float | None:
    below = np.flatnonzero(y[ipk:] < level)
    if below.size == 0:
        return None
    j = ipk + below[0]
    return j - 1 + (y[j - 1] - level) / (y[j - 1] - y[j])


def extract_features(w, thresholds: Thresholds = Thresholds()) -> ScalarFeatures:
    """Features from a processed waveform (anything with ``samples`` and ``sample_period``)."""
    y = np.asarray(w.samples, dtype=float)
    dt = float(w.sample_period)
    ipk = int(np.argmax(y))
    peak = y[ipk]
    if not peak > 0:
        raise NoPulse("waveform has no strictly positive sample")

    def lead(frac):
        t = _leading(y, ipk, frac * peak)
        if t is None:
            raise TruncatedPulse("leading", frac)
        return t * dt

    def trail(frac):
        t = _trailing(y, ipk, frac * peak)
        if t is None:
            raise TruncatedPulse("trailing", frac)
        return t * dt

    rise = lead(thresholds.high) - lead(thresholds.low)
    fall = trail(thresholds.low) - trail(thresholds.high)
    fwhm = trail(thresholds.half) - lead(thresholds.half)
    return ScalarFeatures(float(peak), rise, fall, fwhm)


def extract_batch(waveforms: np.ndarray, sample_period: float,
                  thresholds: Thresholds = Thresholds()):
    """Row-wise features; rows that fail extraction get NaN and an error string."""

    class _W:
        __slots__ = ("samples", "sample_period")

    out = np.full((len(waveforms), 4), np.nan)
    errors: list[str | None] = [None] * len(waveforms)
    w = _W()
    w.sample_period = sample_period
    for i, row in enumerate(waveforms):
        w.samples = row
        try:
            out[i] = extract_features(w, thresholds).as_array()
        except (NoPulse, TruncatedPulse) as exc:
            errors[i] = f"{type(exc).__name__}: {exc}"
    return out, errors
