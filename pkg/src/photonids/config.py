"""Flat experiment configuration with dotted keys (``daq.threshold``, ``anchor.F``...).

Files use one ``key = value`` per line; ``#`` starts a comment. Tuples are
written comma-separated. Unknown keys are rejected everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .daq import DaqConfig
from .features import Thresholds
from .preprocess import PreprocessConfig
from .synth import BetaDist, SynthConfig

CONFIGURATIONS = ("base_only", "actual_only", "cnn_pred_only", "calibrated_only")


class ConfigError(ValueError):
    pass


# key -> (default, help). The type of the default drives parsing.
SCHEMA: dict = {
    "seed": (20240611, "master seed; every stage derives its own stream from it"),
    "data.n_events": (25000, "labeled synthetic events in the evaluation dataset"),
    "data.photon_fraction": (0.5, "share of photon events"),
    "data.train_fraction": (0.68, "stratified train share"),
    "data.val_fraction": (0.12, "stratified validation share (test takes the rest)"),
    "synth.noise_sigma": (4.0, "white noise std, ADC counts"),
    "synth.interference_amp": (3.0, "sinusoidal pickup amplitude, ADC counts"),
    "synth.interference_freq": (0.8, "pickup frequency, GHz"),
    "synth.amplitude_scale": (6000.0, "pulse amplitude at a(x) = 1, ADC counts"),
    "synth.amplitude_jitter": (0.0, "relative class-independent gain spread"),
    "synth.rise_tau": ((2.5, 5.5), "rise time constant range over x in [0, 1], ns"),
    "synth.fall_tau": ((7.0, 15.0), "fall time constant range over x in [0, 1], ns"),
    "synth.dark_fall_stretch": (1.15, "dark-count decay stretch factor"),
    "synth.onset": (3.8, "nominal pulse onset inside the window, ns"),
    "synth.onset_jitter": (0.5, "onset jitter, uniform over [0, value], ns"),
    "synth.dark_beta": ((2.0, 2.0), "Beta(a, b) of position_x for dark counts"),
    "synth.photon_beta": ((2.0, 2.0), "Beta(a, b) of position_x for photons"),
    "stream.n_events": (2000, "pulses in a synthetic stream"),
    "stream.mean_rate": (1.0e6, "mean pulse rate, events/s"),
    "daq.threshold": (20, "trigger level, ADC counts (5 noise sigma)"),
    "daq.pre_samples": (8, "samples kept before the trigger"),
    "daq.post_samples": (192, "samples kept from the trigger on"),
    "daq.inhibition_samples": (192, "samples ignored after a trigger"),
    "preprocess.window": (11, "Savitzky-Golay window"),
    "preprocess.order": (3, "Savitzky-Golay polynomial order"),
    "preprocess.factor": (20, "spline up-sampling factor"),
    "features.low": (0.1, "lower edge fraction for rise/fall"),
    "features.high": (0.9, "upper edge fraction for rise/fall"),
    "features.half": (0.5, "width fraction (FWHM)"),
    "anchor.F": (1000.0, "ruler scaling constant"),
    "anchor.grid_points": (2048, "KDE mode search grid size"),
    "calibrate.bins": (50, "equal-count quantile bins (knots)"),
    "train.regressor.lr": (5e-4, "Adam learning rate"),
    "train.regressor.batch_size": (64, "mini-batch size"),
    "train.regressor.epochs": (50, "epochs"),
    "train.regressor.optimizer": ("adam", "adam or sgd"),
    "train.regressor.lr_schedule": ("constant", "constant or cosine"),
    "train.regressor.dropout": (0.2, "dropout before the output layer"),
    "train.regressor.input_stride": (40, "decimation of the up-sampled waveform fed to the CNN"),
    "train.classifier.lr": (1e-4, "Adam learning rate"),
    "train.classifier.batch_size": (32, "mini-batch size"),
    "train.classifier.epochs": (300, "epoch budget"),
    "train.classifier.patience": (20, "early-stopping patience on validation loss"),
    "train.classifier.optimizer": ("adam", "adam or sgd"),
    "train.classifier.standardize": (True, "z-score classifier inputs on the train split"),
    "train.classifier.standardize_base_only": (False, "same, for the base_only configuration"),
    "evaluate.configuration": ("calibrated_only", "|".join(CONFIGURATIONS)),
    "metrics.tau": (50.0, "tolerance for tolerance accuracy, position units"),
    "snr.S": (4000.0, "photon rate, 1/s"),
    "snr.B": ((300.0, 3000.0, 20000.0), "dark rates, 1/s"),
    "snr.tpr": (0.997, "photon true-positive rate"),
    "snr.fpr": (0.032, "dark false-positive rate"),
}


def _parse_value(key: str, text: str):
    default = SCHEMA[key][0]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            vals = tuple(float(t) for t in text.split(",") if t.strip())
            if not vals:
                raise ValueError(text)
            return vals
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (v, _) in SCHEMA.items()})

    def __post_init__(self):
        unknown = set(self.values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        missing = set(SCHEMA) - set(self.values)
        if missing:
            full = {k: v for k, (v, _) in SCHEMA.items()}
            full.update(self.values)
            object.__setattr__(self, "values", full)
        if self.values["evaluate.configuration"] not in CONFIGURATIONS:
            raise ConfigError(f"evaluate.configuration must be one of {CONFIGURATIONS}")

    def __getitem__(self, key):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def __hash__(self):
        return hash(self.to_text())

    def replace(self, **overrides) -> "ExperimentConfig":
        """Overrides by dotted key, e.g. ``replace(**{"anchor.F": 10.0})``."""
        vals = dict(self.values)
        for k, v in overrides.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown config key: {k}")
            vals[k] = _parse_value(k, v) if isinstance(v, str) else v
        return ExperimentConfig(vals)

    def to_text(self) -> str:
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in self.values.items())

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        vals = {k: v for k, (v, _) in SCHEMA.items()}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"line {n}: unknown config key: {key}")
            vals[key] = _parse_value(key, val)
        return cls(vals)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    # section builders

    def synth_config(self) -> SynthConfig:
        g = self.values
        return SynthConfig(
            noise_sigma=g["synth.noise_sigma"], interference_amp=g["synth.interference_amp"],
            interference_freq=g["synth.interference_freq"],
            amplitude_scale=g["synth.amplitude_scale"], amplitude_jitter=g["synth.amplitude_jitter"],
            rise_tau_range=_pair(g, "synth.rise_tau"), fall_tau_range=_pair(g, "synth.fall_tau"),
            dark_fall_stretch=g["synth.dark_fall_stretch"], onset=g["synth.onset"],
            onset_jitter=g["synth.onset_jitter"],
            class_position_dists=(BetaDist(*_pair(g, "synth.dark_beta")),
                                  BetaDist(*_pair(g, "synth.photon_beta"))),
            seed=g["seed"])

    def daq_config(self) -> DaqConfig:
        g = self.values
        return DaqConfig(g["daq.threshold"], g["daq.pre_samples"], g["daq.post_samples"],
                         g["daq.inhibition_samples"])

    def preprocess_config(self) -> PreprocessConfig:
        g = self.values
        return PreprocessConfig(window=g["preprocess.window"], order=g["preprocess.order"],
                                factor=g["preprocess.factor"], pre_samples=g["daq.pre_samples"])

    def thresholds(self) -> Thresholds:
        g = self.values
        return Thresholds(g["features.low"], g["features.high"], g["features.half"])


def _pair(g, key):
    v = g[key]
    if len(v) != 2:
        raise ConfigError(f"{key} needs exactly two values")
    return (float(v[0]), float(v[1]))


def describe() -> str:
    """Every key with its default and meaning."""
    width = max(map(len, SCHEMA))
    return "\n".join(f"{k:<{width}}  {_format_value(v):<22} {h}" for k, (v, h) in SCHEMA.items())
