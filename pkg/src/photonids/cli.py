"""``photonids`` command line.

Every ExperimentConfig key doubles as a flag (``--daq.threshold 120``); a
config file is read with ``--config``. Failures exit nonzero and print one JSON
line ``{"error": <category>, "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .anchor import AnchorModel, DegenerateFeature, encode_position, fit_anchor
from .calibrate import CalibratorModel, NonMonotoneKnots, apply_calibration, fit_calibrator
from .config import SCHEMA, ConfigError, ExperimentConfig, describe
from .daq import acquire, label_events
from .features import FEATURE_NAMES
from .io import (EventFile, FormatError, load_checkpoint, read_events, read_stream,
                 save_checkpoint, write_csv, write_events, write_stream)
from .metrics import classification_metrics, dumps, snr_table, snr_table_text
from .neural import TrainingDiverged, train_classifier, train_regressor
from .pipeline import (LABEL_NAMES, PipelineBundle, classifier_config, hybrid_features,
                       infer_batch, process_events, regressor_config, run_experiment,
                       standardize_inputs)
from .preprocess import InsufficientSamples, preprocess_batch
from .synth import Label, manifest_rows, synth_dataset, synth_stream

EXIT = {"usage": 2, "config": 2, "format": 3, "data": 4, "training": 5, "internal": 1}
SAMPLE_RATE_HZ = 2_000_000_000


class UsageError(Exception):
    pass


def _split_overrides(extra):
    """Turn leftover ``--key value`` / ``--key=value`` tokens into config overrides."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {tok}")
            val = extra[i + 1]
            i += 2
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        out[key] = val
    return out


def _config(args, extra) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return base.replace(**_split_overrides(extra))


def _valid_events(path, cfg):
    ev = read_events(path)
    ps = process_events(ev.samples, cfg.preprocess_config(), cfg.thresholds(),
                        cfg["train.regressor.input_stride"])
    return ev, ps, ps.valid


def _require_labels(labels):
    if np.any(labels == Label.UNKNOWN):
        raise ValueError("training needs labeled events (label 255 found)")
    return labels.astype(np.int64)


# subcommands


def cmd_synth_dataset(args, cfg):
    samples, labels, pos = synth_dataset(cfg.synth_config(), cfg["data.n_events"],
                                         cfg["data.photon_fraction"], seed=cfg["seed"])
    idx = np.arange(len(samples), dtype=np.uint64)
    write_events(args.out, EventFile(samples, idx, labels, SAMPLE_RATE_HZ,
                                     cfg["daq.pre_samples"], cfg["daq.post_samples"]))
    if args.manifest:
        write_csv(args.manifest, ["event_id", "label", "position_x"],
                  [(i, Label(int(l)).name.lower(), repr(float(x))) for i, (l, x) in enumerate(zip(labels, pos))])
    return {"events": len(samples), "out": str(args.out)}


def cmd_acquire(args, cfg):
    dcfg = cfg.daq_config()
    onsets = labels_gt = None
    if args.stream:
        stream, rate = read_stream(args.stream)
    else:
        s = synth_stream(cfg.synth_config(), cfg["stream.n_events"], cfg["stream.mean_rate"],
                         np.random.default_rng(cfg["seed"]), cfg["data.photon_fraction"])
        stream, rate, onsets, labels_gt = s.samples, SAMPLE_RATE_HZ, s.onsets, s.labels
        if args.stream_out:
            write_stream(args.stream_out, stream, rate)
        if args.manifest:
            rows = [(r["onset_index"], r["label"], repr(r["position_x"])) for r in manifest_rows(s)]
            write_csv(args.manifest, ["onset_index", "label", "position_x"], rows)
    acq = acquire(stream, dcfg)
    if onsets is not None:
        labels = label_events(acq.trigger_indices, onsets, labels_gt)
    else:
        labels = np.full(len(acq.events), Label.UNKNOWN, dtype=np.uint8)
    write_events(args.out, EventFile(acq.events, acq.trigger_indices.astype(np.uint64), labels,
                                     rate, dcfg.pre_samples, dcfg.post_samples))
    return {"stream_samples": int(len(stream)), "triggers": acq.event_count,
            "stored_events": int(len(acq.events)), "stored_bytes": acq.stored_bytes,
            "raw_bytes": int(stream.nbytes)}


def cmd_preprocess(args, cfg):
    ev = read_events(args.events)
    pcfg = cfg.preprocess_config()
    ps = process_events(ev.samples, pcfg, cfg.thresholds(), cfg["train.regressor.input_stride"])
    rows = []
    for i, (lab, f, err) in enumerate(zip(ev.labels, ps.features, ps.errors)):
        name = Label(int(lab)).name.lower()
        rows.append([i, name] + [repr(float(x)) for x in f] + [err or ""])
    write_csv(args.out, ["event_id", "label", *FEATURE_NAMES, "error"], rows)
    if args.waveforms:
        n = min(args.dump, len(ev))
        up, base = preprocess_batch(ev.samples[:n], pcfg)
        dt = pcfg.sample_period / pcfg.factor
        header = ["event_id", "baseline"] + [f"t{j * dt:.3f}" for j in range(up.shape[1])]
        write_csv(args.waveforms, header,
                  [[i, repr(float(base[i]))] + [f"{v:.6g}" for v in up[i]] for i in range(n)])
    return {"events": len(ev), "rejected": int(sum(e is not None for e in ps.errors))}


def cmd_fit_anchor(args, cfg):
    _, ps, ok = _valid_events(args.events, cfg)
    a = fit_anchor(ps.features[ok], cfg["anchor.F"], cfg["anchor.grid_points"])
    Path(args.out).write_text(a.to_json())
    return {"F": a.F, "mu": a.mu.tolist(), "delta": a.delta.tolist()}


def cmd_train_regressor(args, cfg):
    _, ps, ok = _valid_events(args.events, cfg)
    anchor = AnchorModel.from_json(Path(args.anchor).read_text())
    tcfg = regressor_config(cfg)
    model, hist = train_regressor(ps.cnn_inputs[ok], encode_position(ps.features[ok], anchor), tcfg,
                                  input_stride=cfg["train.regressor.input_stride"],
                                  dropout_p=cfg["train.regressor.dropout"], decimated=True)
    save_checkpoint(args.out, model, {"learning_rate": tcfg.learning_rate, "batch_size": tcfg.batch_size,
                                      "epochs": hist.epochs_run, "seed": tcfg.seed,
                                      "train_mse": hist.train_loss})
    return {"epochs": hist.epochs_run, "final_mse": hist.train_loss[-1]}


def _positions(args, cfg, path):
    ev, ps, ok = _valid_events(path, cfg)
    anchor = AnchorModel.from_json(Path(args.anchor).read_text())
    reg = load_checkpoint(args.regressor)
    v = ps.features[ok]
    return ev, ok, v, encode_position(v, anchor), reg.predict(ps.cnn_inputs[ok], decimated=True)


def cmd_fit_calibrator(args, cfg):
    _, _, _, p_act, p_raw = _positions(args, cfg, args.events)
    cal = fit_calibrator(p_raw, p_act, cfg["calibrate.bins"])
    Path(args.out).write_text(cal.to_json())
    return {"knots": [len(c.t) for c in cal.channels]}


def _hybrid(args, cfg, path):
    ev, ok, v, p_act, p_raw = _positions(args, cfg, path)
    cal = CalibratorModel.from_json(Path(args.calibrator).read_text())
    z = hybrid_features(cfg["evaluate.configuration"], v, p_act, p_raw, apply_calibration(cal, p_raw))
    return z, _require_labels(ev.labels[ok])


def cmd_train_classifier(args, cfg):
    z, y = _hybrid(args, cfg, args.events)
    zv = yv = None
    if args.val:
        zv, yv = _hybrid(args, cfg, args.val)
    tcfg = classifier_config(cfg)
    model, hist = train_classifier(z, y, tcfg, zv, yv, standardize=standardize_inputs(cfg, cfg["evaluate.configuration"]))
    meta = {"learning_rate": tcfg.learning_rate, "batch_size": tcfg.batch_size, "seed": tcfg.seed,
            "epochs": hist.epochs_run, "best_epoch": hist.best_epoch,
            "configuration": cfg["evaluate.configuration"],
            "train_loss": hist.train_loss, "val_loss": hist.val_loss}
    save_checkpoint(args.out, model, meta)
    if args.bundle_out:
        bundle = PipelineBundle(AnchorModel.from_json(Path(args.anchor).read_text()),
                                load_checkpoint(args.regressor),
                                CalibratorModel.from_json(Path(args.calibrator).read_text()),
                                model, cfg.preprocess_config(), cfg.thresholds(),
                                cfg["evaluate.configuration"],
                                {"seed": cfg["seed"], "config": cfg.to_text(), "classifier": meta})
        bundle.save(args.bundle_out)
    return {"epochs": hist.epochs_run, "best_epoch": hist.best_epoch}


def cmd_evaluate(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.bundle:
        bundle = PipelineBundle.load(args.bundle)
        ev = read_events(args.events)
        labels, probs = infer_batch(bundle, ev.samples)
        keep = np.array([l != "rejected" for l in labels]) & (ev.labels != Label.UNKNOWN)
        pred = np.array([1 if l == "photon" else 0 for l in labels])[keep]
        rep = classification_metrics(ev.labels[keep], pred, probs[keep, 1])
        (out / "report.json").write_text(dumps(rep.to_dict()))
        (out / "report.txt").write_text(rep.to_text() + "\n")
        (out / f"confusion_{bundle.configuration}.csv").write_text(rep.confusion_csv())
        return {"configuration": bundle.configuration, "accuracy": rep.accuracy, "roc_auc": rep.roc_auc}

    configs = [cfg["evaluate.configuration"]] if args.only else None
    res = run_experiment(cfg, *(configs and [configs] or []))
    summary = res.summary()
    (out / "report.json").write_text(dumps(summary))
    lines = ["raw CNN vs anchored targets (test)", res.raw_regression.to_text(), "",
             "calibrated vs anchored targets (test)", res.calibrated_regression.to_text(), "",
             "raw CNN mapped back through the z-score constants (test)",
             res.destandardized_regression.to_text(), ""]
    for name, r in res.configurations.items():
        lines += [f"[{name}]  silhouette (penultimate activations) {r.silhouette:.4f}",
                  r.report.to_text(), ""]
        (out / f"confusion_{name}.csv").write_text(r.report.confusion_csv())
    (out / "report.txt").write_text("\n".join(lines))
    if res.bundle is not None:
        res.bundle.save(out / "bundle")
    return {k: {"accuracy": r.report.accuracy, "roc_auc": r.report.roc_auc}
            for k, r in res.configurations.items()}


def cmd_snr_report(args, cfg):
    reports = snr_table(cfg["snr.S"], cfg["snr.B"], cfg["snr.tpr"], cfg["snr.fpr"])
    text = snr_table_text(reports)
    if args.out:
        Path(args.out).write_text(dumps([r.to_dict() for r in reports]))
    print(text)
    return None


def cmd_infer(args, cfg):
    bundle = PipelineBundle.load(args.bundle)
    ev = read_events(args.events)
    labels, probs = infer_batch(bundle, ev.samples)
    rows = []
    for i, (trig, lab, pr) in enumerate(zip(ev.trigger_indices, labels, probs)):
        rows.append([i, int(trig), lab] + ([repr(float(p)) for p in pr] if lab != "rejected" else ["", ""]))
    write_csv(args.out, ["event_id", "trigger_index", "label", "p_dark", "p_photon"], rows)
    counts = {name: labels.count(name) for name in (*LABEL_NAMES.values(), "rejected")}
    return counts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonids", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-dataset", help="labeled synthetic events")
    s.add_argument("--out", required=True)
    s.add_argument("--manifest")

    s = sub.add_parser("acquire", help="run the trigger on a stream (synthetic unless --stream)")
    s.add_argument("--out", required=True)
    s.add_argument("--stream")
    s.add_argument("--stream-out")
    s.add_argument("--manifest")

    s = sub.add_parser("preprocess", help="features (and optionally processed waveforms) as CSV")
    s.add_argument("--events", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--waveforms")
    s.add_argument("--dump", type=int, default=10)

    s = sub.add_parser("fit-anchor")
    s.add_argument("--events", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train-regressor")
    for a in ("--events", "--anchor", "--out"):
        s.add_argument(a, required=True)

    s = sub.add_parser("fit-calibrator")
    for a in ("--events", "--anchor", "--regressor", "--out"):
        s.add_argument(a, required=True)

    s = sub.add_parser("train-classifier")
    for a in ("--events", "--anchor", "--regressor", "--calibrator", "--out"):
        s.add_argument(a, required=True)
    s.add_argument("--val")
    s.add_argument("--bundle-out")

    s = sub.add_parser("evaluate", help="four-configuration experiment, or a saved bundle on events")
    s.add_argument("--out", required=True)
    s.add_argument("--bundle")
    s.add_argument("--events")
    s.add_argument("--only", action="store_true", help="just evaluate.configuration")

    s = sub.add_parser("snr-report")
    s.add_argument("--out")

    s = sub.add_parser("infer")
    for a in ("--bundle", "--events", "--out"):
        s.add_argument(a, required=True)

    sub.add_parser("config", help="print every config key with its default")
    return p


COMMANDS = {
    "synth-dataset": cmd_synth_dataset, "acquire": cmd_acquire, "preprocess": cmd_preprocess,
    "fit-anchor": cmd_fit_anchor, "train-regressor": cmd_train_regressor,
    "fit-calibrator": cmd_fit_calibrator, "train-classifier": cmd_train_classifier,
    "evaluate": cmd_evaluate, "snr-report": cmd_snr_report, "infer": cmd_infer,
}


def _fail(category, exc) -> int:
    print(json.dumps({"error": category, "message": str(exc)}), file=sys.stderr)
    return EXIT[category]


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        cfg = _config(args, extra)
        if args.command == "config":
            print(describe())
            return 0
        if args.command == "evaluate" and bool(args.bundle) != bool(args.events):
            raise UsageError("evaluate needs both --bundle and --events, or neither")
        result = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail("usage", exc)
    except ConfigError as exc:
        return _fail("config", exc)
    except (FormatError, OSError) as exc:
        return _fail("format", exc)
    except TrainingDiverged as exc:
        return _fail("training", exc)
    except (DegenerateFeature, InsufficientSamples, NonMonotoneKnots, ValueError) as exc:
        return _fail("data", exc)
    if result is not None:
        print(dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
