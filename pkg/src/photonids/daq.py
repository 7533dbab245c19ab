"""Event-driven acquisition: a threshold trigger with post-trigger inhibition.

The stream is ARMED from its first sample. A sample strictly above the
threshold fires a trigger; the next ``inhibition_samples`` samples are
ignored, after which the machine re-arms. Each trigger with full context is
stored as a fixed window of ``pre_samples + post_samples`` samples whose
index ``pre_samples`` is the trigger sample.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .synth import ADC_MAX, ADC_MIN, Label


class Mode(enum.Enum):
    IDLE = "idle"
    ARMED = "armed"
    INHIBITION = "inhibition"


@dataclass(frozen=True)
class DaqConfig:
    threshold: int = 20
    pre_samples: int = 8
    post_samples: int = 192
    inhibition_samples: int = 192

    def __post_init__(self):
        if self.pre_samples < 0 or self.post_samples < 1:
            raise ValueError("invalid capture window")
        if self.inhibition_samples < self.post_samples:
            raise ValueError("inhibition_samples must be >= post_samples")
        if not ADC_MIN <= self.threshold <= ADC_MAX:
            raise ValueError("threshold outside the ADC range")

    @property
    def window(self) -> int:
        return self.pre_samples + self.post_samples


def default_threshold(noise_sigma: float, baseline: float = 0.0, k: float = 5.0) -> int:
    """Trigger level k noise standard deviations above the baseline."""
    return int(round(baseline + k * noise_sigma))


@dataclass
class DaqState:
    mode: Mode = Mode.ARMED
    history: deque = field(default_factory=deque)
    inhibit_remaining: int = 0
    event_count: int = 0

    @classmethod
    def armed(cls, cfg: DaqConfig) -> "DaqState":
        return cls(Mode.ARMED, deque(maxlen=cfg.pre_samples), 0, 0)


def step(state: DaqState, sample: int, index: int, cfg: DaqConfig):
    """Advance the machine by one sample (mutating ``state``).

    Returns ``(state, trigger_index or None)``.
    """
    trigger = None
    if state.mode is Mode.ARMED:
        if sample > cfg.threshold:
            trigger = index
            state.mode = Mode.INHIBITION
            state.inhibit_remaining = cfg.inhibition_samples
            state.event_count += 1
    elif state.mode is Mode.INHIBITION:
        state.inhibit_remaining -= 1
        if state.inhibit_remaining == 0:
            state.mode = Mode.ARMED
    state.history.append(sample)
    return state, trigger


@dataclass
class CapturedEvent:
    trigger_index: int
    samples: np.ndarray  # int16, length pre + post
    label: Label = Label.UNKNOWN


@dataclass
class Acquisition:
    events: np.ndarray  # (n_stored, window) int16
    trigger_indices: np.ndarray  # stored events only
    all_triggers: np.ndarray  # every trigger, stored or not
    event_count: int

    @property
    def stored_bytes(self) -> int:
        return self.events.nbytes

    def captured(self, labels=None):
        for k, (i, row) in enumerate(zip(self.trigger_indices, self.events)):
            lab = Label.UNKNOWN if labels is None else Label(int(labels[k]))
            yield CapturedEvent(int(i), row, lab)


def trigger_indices(stream, cfg: DaqConfig) -> np.ndarray:
    """All trigger positions; jumps between supra-threshold samples instead of stepping."""
    above = np.flatnonzero(np.asarray(stream) > cfg.threshold)
    out = []
    pos = 0
    while pos < above.size:
        i = int(above[pos])
        out.append(i)
        pos = int(np.searchsorted(above, i + cfg.inhibition_samples + 1, side="left"))
    return np.asarray(out, dtype=np.int64)


def acquire(stream, cfg: DaqConfig) -> Acquisition:
    """Extract fixed-length events; triggers lacking full context are counted, not stored."""
    x = np.asarray(stream)
    trig = trigger_indices(x, cfg) if x.size else np.zeros(0, dtype=np.int64)
    ok = (trig >= cfg.pre_samples) & (trig + cfg.post_samples <= x.size)
    kept = trig[ok]
    events = np.empty((kept.size, cfg.window), dtype=np.int16)
    for k, i in enumerate(kept):
        events[k] = x[i - cfg.pre_samples:i + cfg.post_samples]
    return Acquisition(events, kept, trig, int(trig.size))


def label_events(trigger_idx, onsets, labels, max_delay: int = 40) -> np.ndarray:
    """Attach ground-truth labels by matching each trigger to the latest onset before it."""
    onsets = np.asarray(onsets)
    out = np.full(len(trigger_idx), Label.UNKNOWN, dtype=np.uint8)
    if onsets.size == 0:
        return out
    pos = np.searchsorted(onsets, trigger_idx, side="right") - 1
    for k, (i, p) in enumerate(zip(trigger_idx, pos)):
        if p >= 0 and i - onsets[p] <= max_delay:
            out[k] = labels[p]
    return out
