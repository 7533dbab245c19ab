"""Synthetic SNSPD-like pulse generator.

Pulses follow the usual double-exponential readout shape. A latent
nanowire coordinate ``position_x`` in [0, 1] modulates amplitude and both
time constants; the dark-count class uses a stretched decay for the same
coordinate, so single-feature marginals overlap while the joint
(amplitude, rise, fall) manifolds of the two classes stay apart.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

ADC_MIN = -32768
ADC_MAX = 32767


class Label(enum.IntEnum):
    DARK = 0
    PHOTON = 1
    UNKNOWN = 255

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class PulseParams:
    amplitude_scale: float  # ADC counts
    rise_tau: float  # ns
    fall_tau: float  # ns
    onset: float  # ns
    position_x: float = 0.5

    def __post_init__(self):
        if not self.rise_tau > 0:
            raise ValueError(f"rise_tau must be > 0, got {self.rise_tau}")
        if not self.fall_tau > self.rise_tau:
            raise ValueError("fall_tau must exceed rise_tau")
        if not self.amplitude_scale >= 0:
            raise ValueError("amplitude_scale must be >= 0")
        if not 0.0 <= self.position_x <= 1.0:
            raise ValueError("position_x must lie in [0, 1]")


@dataclass(frozen=True)
class BetaDist:
    a: float
    b: float

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.a, self.b, size=size)


@dataclass(frozen=True)
class SynthConfig:
    sample_period: float = 0.5
    window_samples: int = 200
    noise_sigma: float = 4.0
    interference_amp: float = 3.0
    interference_freq: float = 0.8  # GHz
    baseline: float = 0.0
    # per-event pulse model
    amplitude_scale: float = 6000.0
    amplitude_jitter: float = 0.0  # relative gain spread, class independent
    rise_tau_range: tuple[float, float] = (2.5, 5.5)
    fall_tau_range: tuple[float, float] = (7.0, 15.0)
    dark_fall_stretch: float = 1.15
    onset: float = 3.8  # ns, keeps the 8 pre-trigger samples quiet
    onset_jitter: float = 0.5  # ns
    class_position_dists: tuple[BetaDist, BetaDist] = field(
        default=(BetaDist(2.0, 2.0), BetaDist(2.0, 2.0)))  # (dark, photon)
    adc_range: tuple[int, int] = (ADC_MIN, ADC_MAX)
    seed: int = 20240611

    def __post_init__(self):
        if self.noise_sigma < 0 or self.interference_amp < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.window_samples < 1 or self.sample_period <= 0:
            raise ValueError("invalid sampling grid")
        lo, hi = self.rise_tau_range
        flo, fhi = self.fall_tau_range
        if not (0 < lo <= hi and 0 < flo <= fhi and hi < flo):
            raise ValueError("time-constant ranges must be positive with rise < fall")
        if self.dark_fall_stretch <= 0:
            raise ValueError("dark_fall_stretch must be positive")

    @property
    def window_ns(self) -> float:
        return self.window_samples * self.sample_period

    def position_dist(self, label: Label) -> BetaDist:
        return self.class_position_dists[1 if label == Label.PHOTON else 0]


@dataclass
class RawWaveform:
    samples: np.ndarray  # int16-range integers
    sample_period: float
    label: Label = Label.UNKNOWN
    position_x: float = float("nan")


def amplitude_modulation(x):
    """Monotone gain profile a(x) along the nanowire (0.5 at one end, 1.5 at the other)."""
    return 0.5 + np.asarray(x, dtype=float)


def pulse_peak(p: PulseParams) -> tuple[float, float]:
    """Closed-form (time, value) of the pulse maximum."""
    r, f = p.rise_tau, p.fall_tau
    s = r * math.log1p(f / r)
    a = p.amplitude_scale * float(amplitude_modulation(p.position_x))
    return p.onset + s, a * (1.0 - math.exp(-s / r)) * math.exp(-s / f)


def pulse_shape(t, p: PulseParams):
    """Evaluate the double-exponential pulse at time(s) ``t`` in ns."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    s = t - p.onset
    a = p.amplitude_scale * float(amplitude_modulation(p.position_x))
    with np.errstate(over="ignore"):
        out = np.where(s >= 0, a * (-np.expm1(-np.maximum(s, 0) / p.rise_tau))
                       * np.exp(-np.maximum(s, 0) / p.fall_tau), 0.0)
    return out if out.ndim else float(out)


def pulse_params_for(cfg: SynthConfig, label: Label, x: float, gain: float = 1.0,
                     onset: float | None = None) -> PulseParams:
    """Map a nanowire coordinate to pulse parameters for the given class."""
    rlo, rhi = cfg.rise_tau_range
    flo, fhi = cfg.fall_tau_range
    rise = rlo + (rhi - rlo) * x
    fall = flo + (fhi - flo) * x
    if label == Label.DARK:
        fall *= cfg.dark_fall_stretch
    return PulseParams(amplitude_scale=cfg.amplitude_scale * gain, rise_tau=rise,
                       fall_tau=fall, onset=cfg.onset if onset is None else onset,
                       position_x=float(x))


def _quantize(values, cfg: SynthConfig) -> np.ndarray:
    lo, hi = cfg.adc_range
    return np.clip(np.rint(values), lo, hi).astype(np.int16)


def _noise(cfg: SynthConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    out = rng.normal(0.0, cfg.noise_sigma, n) if cfg.noise_sigma > 0 else np.zeros(n)
    if cfg.interference_amp > 0:
        phase = rng.uniform(0.0, 2 * np.pi)
        t = np.arange(n) * cfg.sample_period
        out = out + cfg.interference_amp * np.sin(2 * np.pi * cfg.interference_freq * t + phase)
    return out


def draw_params(cfg: SynthConfig, label: Label, rng: np.random.Generator) -> PulseParams:
    x = float(cfg.position_dist(label).sample(rng))
    gain = 1.0 + cfg.amplitude_jitter * rng.standard_normal() if cfg.amplitude_jitter else 1.0
    onset = cfg.onset + rng.uniform(0.0, cfg.onset_jitter) if cfg.onset_jitter else cfg.onset
    return pulse_params_for(cfg, label, x, gain=max(gain, 0.0), onset=onset)


def render(cfg: SynthConfig, p: PulseParams, rng: np.random.Generator | None = None) -> np.ndarray:
    t = np.arange(cfg.window_samples) * cfg.sample_period
    clean = pulse_shape(t, p) + cfg.baseline
    if rng is not None:
        clean = clean + _noise(cfg, cfg.window_samples, rng)
    return _quantize(clean, cfg)


def synth_waveform(cfg: SynthConfig, label, rng: np.random.Generator) -> RawWaveform:
    """Draw one labeled capture window."""
    label = Label.parse(label)
    if label == Label.UNKNOWN:
        raise ValueError("synth_waveform needs a concrete class")
    p = draw_params(cfg, label, rng)
    return RawWaveform(render(cfg, p, rng), cfg.sample_period, label, p.position_x)


def synth_dataset(cfg: SynthConfig, n_events: int, photon_fraction: float = 0.5,
                  seed: int | None = None):
    """Balanced labeled dataset as (samples[int16, n x L], labels, positions)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n_photon = int(round(n_events * photon_fraction))
    labels = np.array([Label.PHOTON] * n_photon + [Label.DARK] * (n_events - n_photon), dtype=np.uint8)
    rng.shuffle(labels)
    samples = np.empty((n_events, cfg.window_samples), dtype=np.int16)
    positions = np.empty(n_events)
    for i, lab in enumerate(labels):
        w = synth_waveform(cfg, Label(int(lab)), rng)
        samples[i] = w.samples
        positions[i] = w.position_x
    return samples, labels, positions


@dataclass
class SynthStream:
    samples: np.ndarray
    onsets: np.ndarray  # sample index of each pulse onset
    labels: np.ndarray
    positions: np.ndarray
    sample_period: float


def synth_stream(cfg: SynthConfig, n_events: int, mean_rate: float,
                 rng: np.random.Generator, photon_fraction: float = 0.5,
                 tail_samples: int | None = None) -> SynthStream:
    """Continuous stream with Poisson-spaced pulses.

    ``mean_rate`` is in events per second. Onsets are drawn as a Poisson process
    and the stream ends ``tail_samples`` after the last onset.
    """
    period_s = cfg.sample_period * 1e-9
    mean_gap = 1.0 / (mean_rate * period_s) if mean_rate > 0 else math.inf
    if n_events > 0 and mean_gap <= cfg.window_samples:
        raise ValueError("mean inter-arrival shorter than the capture window")
    tail = cfg.window_samples if tail_samples is None else tail_samples
    gaps = rng.exponential(mean_gap, n_events)
    onset_t = np.cumsum(gaps) if n_events else np.zeros(0)
    onsets = np.floor(onset_t).astype(np.int64)
    length = int(onsets[-1]) + tail + 1 if n_events else max(tail, 1)
    labels = np.where(rng.random(n_events) < photon_fraction, Label.PHOTON, Label.DARK).astype(np.uint8)
    positions = np.empty(n_events)

    signal = np.full(length, cfg.baseline, dtype=float)
    if cfg.noise_sigma > 0:
        signal += rng.normal(0.0, cfg.noise_sigma, length)
    if cfg.interference_amp > 0:
        t = np.arange(length) * cfg.sample_period
        signal += cfg.interference_amp * np.sin(2 * np.pi * cfg.interference_freq * t
                                                + rng.uniform(0, 2 * np.pi))
    # pulses are rendered over a finite support; beyond 12 decay constants they are below 1e-5 of peak
    for i, (k, lab) in enumerate(zip(onsets, labels)):
        p = draw_params(cfg, Label(int(lab)), rng)
        p = PulseParams(p.amplitude_scale, p.rise_tau, p.fall_tau, onset=0.0, position_x=p.position_x)
        positions[i] = p.position_x
        support = int(math.ceil(12 * p.fall_tau / cfg.sample_period)) + 1
        stop = min(length, k + support)
        signal[k:stop] += pulse_shape(np.arange(stop - k) * cfg.sample_period, p)
    return SynthStream(_quantize(signal, cfg), onsets, labels, positions, cfg.sample_period)


def manifest_rows(stream: SynthStream):
    for k, lab, x in zip(stream.onsets, stream.labels, stream.positions):
        yield {"onset_index": int(k), "label": Label(int(lab)).name.lower(), "position_x": float(x)}
