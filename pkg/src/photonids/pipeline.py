"""End-to-end assembly: dataset processing, training stages, bundle, inference.

Per-event inference runs, in order: preprocess, feature extraction, raw
position regression, calibration, hybrid vector ``z = [v, p_hat]``, and
classification. The batch path below runs the same operations over arrays.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .anchor import AnchorModel, encode_position, fit_anchor
from .calibrate import CalibratorModel, apply_calibration, fit_calibrator
from .config import CONFIGURATIONS, ExperimentConfig
from .features import NoPulse, Thresholds, TruncatedPulse, extract_batch, extract_features
from .io import load_checkpoint, save_checkpoint
from .metrics import (ClassificationReport, RegressionReport, classification_metrics,
                      regression_metrics, silhouette)
from .neural import (CnnModel, FcnnModel, TrainConfig, classify, predict_positions,
                     train_classifier, train_regressor)
from .preprocess import PreprocessConfig, preprocess_batch, preprocess_event
from .synth import Label, synth_dataset

log = logging.getLogger(__name__)

LABEL_NAMES = {0: "dark", 1: "photon"}
POSITION_NAMES = ("p_peak", "p_rise", "p_fall", "p_fwhm")


@dataclass
class ProcessedSet:
    features: np.ndarray  # (n, 4), NaN rows where extraction failed
    errors: list
    cnn_inputs: np.ndarray  # processed waveforms decimated for the regressor

    @property
    def valid(self) -> np.ndarray:
        return np.array([e is None for e in self.errors])


def process_events(samples, pcfg: PreprocessConfig = PreprocessConfig(),
                   thresholds: Thresholds = Thresholds(), input_stride: int = 40,
                   chunk: int = 1024) -> ProcessedSet:
    """Preprocess and featurize raw events chunk-wise (the full up-sampled set is never held)."""
    samples = np.atleast_2d(np.asarray(samples))
    feats, errors, dec = [], [], []
    for s in range(0, len(samples), chunk):
        up, _ = preprocess_batch(samples[s:s + chunk], pcfg)
        f, e = extract_batch(up, pcfg.sample_period / pcfg.factor, thresholds)
        feats.append(f)
        errors.extend(e)
        dec.append(up[:, ::input_stride].copy())
    width = (samples.shape[1] - 1) * pcfg.factor // input_stride + 1
    return ProcessedSet(np.concatenate(feats) if feats else np.zeros((0, 4)), errors,
                        np.concatenate(dec) if dec else np.zeros((0, width)))


def stratified_split(labels, fractions=(0.68, 0.12), seed: int = 0):
    """Index arrays (train, val, test), stratified by label; test takes the remainder."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(round(fractions[0] * idx.size))
        n_va = int(round(fractions[1] * idx.size))
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr:n_tr + n_va])
        parts[2].append(idx[n_tr + n_va:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def hybrid_features(configuration: str, v, p_actual=None, p_raw=None, p_cal=None) -> np.ndarray:
    """Classifier inputs: the four scalars, then (optionally) four positions."""
    v = np.atleast_2d(v)
    extra = {"base_only": None, "actual_only": p_actual, "cnn_pred_only": p_raw,
             "calibrated_only": p_cal}
    if configuration not in extra:
        raise ValueError(f"unknown configuration {configuration!r}")
    p = extra[configuration]
    if configuration == "base_only":
        return v.copy()
    if p is None:
        raise ValueError(f"{configuration} needs its position block")
    return np.concatenate([v, np.atleast_2d(p)], axis=1)


def regressor_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(cfg["train.regressor.lr"], cfg["train.regressor.batch_size"],
                       cfg["train.regressor.epochs"], cfg["seed"] + 2,
                       cfg["train.regressor.optimizer"],
                       lr_schedule=cfg["train.regressor.lr_schedule"])


def classifier_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(cfg["train.classifier.lr"], cfg["train.classifier.batch_size"],
                       cfg["train.classifier.epochs"], cfg["seed"] + 3,
                       cfg["train.classifier.optimizer"], cfg["train.classifier.patience"])


def standardize_inputs(cfg: ExperimentConfig, configuration: str) -> bool:
    key = "train.classifier.standardize_base_only" if configuration == "base_only" \
        else "train.classifier.standardize"
    return bool(cfg[key])


def dataset_hash(samples, labels) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(samples, dtype="<i2").tobytes())
    h.update(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())
    return h.hexdigest()


@dataclass
class PipelineBundle:
    anchor: AnchorModel
    regressor: CnnModel
    calibrator: CalibratorModel
    classifier: FcnnModel
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    configuration: str = "calibrated_only"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n_out = self.regressor.target_mean.size
        if n_out != 4 or len(self.calibrator.channels) != 4:
            raise ValueError("regressor and calibrator must have 4 channels")
        want = 4 if self.configuration == "base_only" else 8
        if self.classifier.n_inputs != want:
            raise ValueError(f"{self.configuration} classifier needs {want} inputs")
        if not self.provenance:
            raise ValueError("bundle provenance must not be empty")

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "anchor.json").write_text(self.anchor.to_json())
        (d / "calibrator.json").write_text(self.calibrator.to_json())
        save_checkpoint(d / "regressor.phnn", self.regressor, self.provenance.get("regressor", {}))
        save_checkpoint(d / "classifier.phnn", self.classifier, self.provenance.get("classifier", {}))
        meta = {"configuration": self.configuration,
                "preprocess": asdict(self.preprocess),
                "thresholds": asdict(self.thresholds),
                "provenance": self.provenance}
        (d / "bundle.json").write_text(json.dumps(meta, indent=2, default=str))

    @classmethod
    def load(cls, directory) -> "PipelineBundle":
        d = Path(directory)
        meta = json.loads((d / "bundle.json").read_text())
        return cls(AnchorModel.from_json((d / "anchor.json").read_text()),
                   load_checkpoint(d / "regressor.phnn"),
                   CalibratorModel.from_json((d / "calibrator.json").read_text()),
                   load_checkpoint(d / "classifier.phnn"),
                   PreprocessConfig(**meta["preprocess"]), Thresholds(**meta["thresholds"]),
                   meta["configuration"], meta["provenance"])

    def digest(self) -> str:
        """Content hash over every learned parameter."""
        h = hashlib.sha256()
        h.update(self.anchor.to_json().encode())
        h.update(self.calibrator.to_json().encode())
        for model in (self.regressor, self.classifier):
            for k, v in sorted(model.net.state().items()):
                h.update(k.encode())
                h.update(np.ascontiguousarray(v).tobytes())
            for k, v in sorted(model.extras().items()):
                h.update(k.encode())
                h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()


@dataclass
class Inference:
    label: str  # "photon", "dark" or "rejected"
    probabilities: np.ndarray | None
    v: np.ndarray | None
    p_hat: np.ndarray | None
    p_raw: np.ndarray | None = None
    error: str | None = None


def infer_event(bundle: PipelineBundle, event) -> Inference:
    """Classify one captured event, returning every intermediate."""
    w = preprocess_event(event, bundle.preprocess)
    try:
        v = extract_features(w, bundle.thresholds).as_array()
    except (NoPulse, TruncatedPulse) as exc:
        return Inference("rejected", None, None, None, None, f"{type(exc).__name__}: {exc}")
    p_raw = predict_positions(bundle.regressor, w)
    p_hat = apply_calibration(bundle.calibrator, p_raw)
    z = hybrid_features(bundle.configuration, v, encode_position(v, bundle.anchor), p_raw, p_hat)[0]
    probs, lab = classify(bundle.classifier, z)
    return Inference(LABEL_NAMES[lab], probs, v, p_hat, p_raw)


def infer_batch(bundle: PipelineBundle, samples, chunk: int = 1024):
    """Array version of ``infer_event``: (labels as str list, probabilities (n, 2) NaN when rejected)."""
    ps = process_events(samples, bundle.preprocess, bundle.thresholds,
                        bundle.regressor.input_stride, chunk)
    ok = ps.valid
    labels = ["rejected"] * len(ok)
    probs = np.full((len(ok), 2), np.nan)
    if ok.any():
        v = ps.features[ok]
        p_raw = bundle.regressor.predict(ps.cnn_inputs[ok], decimated=True)
        p_hat = apply_calibration(bundle.calibrator, p_raw)
        z = hybrid_features(bundle.configuration, v, encode_position(v, bundle.anchor), p_raw, p_hat)
        pr = bundle.classifier.predict_proba(z)
        probs[ok] = pr
        for i, k in zip(np.flatnonzero(ok), np.argmax(pr, axis=1)):
            labels[i] = LABEL_NAMES[int(k)]
    return labels, probs


@dataclass
class ConfigurationResult:
    report: ClassificationReport
    silhouette: float
    epochs_run: int
    best_epoch: int | None
    classifier: FcnnModel = field(repr=False)


@dataclass
class ExperimentResult:
    configurations: dict  # name -> ConfigurationResult
    raw_regression: RegressionReport  # raw CNN output vs anchored targets
    calibrated_regression: RegressionReport
    destandardized_regression: RegressionReport  # raw output mapped back by the z-score constants
    split_sizes: dict
    timings: dict
    bundle: PipelineBundle | None = None
    rejected: int = 0

    def summary(self) -> dict:
        return {
            "split_sizes": self.split_sizes,
            "rejected_events": self.rejected,
            "timings_s": {k: round(v, 2) for k, v in self.timings.items()},
            "regression": {"raw": self.raw_regression.to_dict(),
                           "calibrated": self.calibrated_regression.to_dict(),
                           "destandardized": self.destandardized_regression.to_dict()},
            "classification": {k: {**r.report.to_dict(), "silhouette_penultimate": r.silhouette,
                                   "epochs_run": r.epochs_run, "best_epoch": r.best_epoch}
                               for k, r in self.configurations.items()},
        }


def run_experiment(cfg: ExperimentConfig = ExperimentConfig(), configurations=CONFIGURATIONS,
                   silhouette_points: int = 2000) -> ExperimentResult:
    """Synthesize, split, fit every stage and evaluate the requested input configurations."""
    timings = {}
    t0 = time.perf_counter()
    scfg = cfg.synth_config()
    samples, labels, _ = synth_dataset(scfg, cfg["data.n_events"], cfg["data.photon_fraction"],
                                       seed=cfg["seed"])
    pcfg = cfg.preprocess_config()
    stride = cfg["train.regressor.input_stride"]
    ps = process_events(samples, pcfg, cfg.thresholds(), stride)
    timings["synth+preprocess"] = time.perf_counter() - t0

    ok = np.flatnonzero(ps.valid)
    tr, va, te = (ok[i] for i in stratified_split(
        labels[ok], (cfg["data.train_fraction"], cfg["data.val_fraction"]), cfg["seed"] + 1))
    v, y = ps.features, labels.astype(np.int64)

    t = time.perf_counter()
    anchor = fit_anchor(v[tr], cfg["anchor.F"], cfg["anchor.grid_points"])
    p_act = np.full_like(v, np.nan)
    p_act[ok] = encode_position(v[ok], anchor)
    timings["anchor"] = time.perf_counter() - t

    t = time.perf_counter()
    reg, reg_hist = train_regressor(ps.cnn_inputs[tr], p_act[tr], regressor_config(cfg),
                                    input_stride=stride, dropout_p=cfg["train.regressor.dropout"],
                                    decimated=True)
    p_raw = np.full_like(v, np.nan)
    p_raw[ok] = reg.predict(ps.cnn_inputs[ok], decimated=True)
    timings["regressor"] = time.perf_counter() - t

    t = time.perf_counter()
    fit_idx = np.concatenate([tr, va])
    cal = fit_calibrator(p_raw[fit_idx], p_act[fit_idx], cfg["calibrate.bins"])
    p_cal = np.full_like(v, np.nan)
    p_cal[ok] = apply_calibration(cal, p_raw[ok])
    timings["calibrator"] = time.perf_counter() - t

    tau = cfg["metrics.tau"]
    raw_rep = regression_metrics(p_raw[te], p_act[te], tau, list(POSITION_NAMES))
    cal_rep = regression_metrics(p_cal[te], p_act[te], tau, list(POSITION_NAMES))
    dst_rep = regression_metrics(reg.destandardize(p_raw[te]), p_act[te], tau, list(POSITION_NAMES))

    provenance = {"version": __version__, "seed": cfg["seed"],
                  "dataset_sha256": dataset_hash(samples, labels),
                  "config_sha256": hashlib.sha256(cfg.to_text().encode()).hexdigest(),
                  "split": {"train": int(tr.size), "val": int(va.size), "test": int(te.size)},
                  "regressor": {"train_mse": reg_hist.train_loss, "epochs": reg_hist.epochs_run,
                                "seed": regressor_config(cfg).seed}}

    results, bundle = {}, None
    ccfg = classifier_config(cfg)
    sil_idx = te[np.random.default_rng(cfg["seed"] + 4).permutation(te.size)[:silhouette_points]]
    for name in configurations:
        t = time.perf_counter()
        z = hybrid_features(name, v, p_act, p_raw, p_cal)
        clf, hist = train_classifier(z[tr], y[tr], ccfg, z[va], y[va],
                                     standardize=standardize_inputs(cfg, name))
        probs = clf.predict_proba(z[te])
        rep = classification_metrics(y[te], np.argmax(probs, axis=1), probs[:, 1])
        sil = silhouette(clf.embed(z[sil_idx]), y[sil_idx])
        results[name] = ConfigurationResult(rep, sil, hist.epochs_run, hist.best_epoch, clf)
        timings[f"classifier[{name}]"] = time.perf_counter() - t
        log.info("%s: accuracy %.4f auc %.4f", name, rep.accuracy, rep.roc_auc)
        if name == cfg["evaluate.configuration"]:
            prov = dict(provenance)
            prov["classifier"] = {"train_loss": hist.train_loss, "val_loss": hist.val_loss,
                                  "best_epoch": hist.best_epoch, "seed": ccfg.seed}
            bundle = PipelineBundle(anchor, reg, cal, clf, pcfg, cfg.thresholds(), name, prov)
    timings["total"] = time.perf_counter() - t0
    return ExperimentResult(results, raw_rep, cal_rep, dst_rep,
                            {"train": int(tr.size), "val": int(va.size), "test": int(te.size)},
                            timings, bundle, int(len(ps.errors) - ok.size))


def label_name(code: int) -> str:
    return Label(int(code)).name.lower()
