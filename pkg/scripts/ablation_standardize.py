"""base_only classifier with and without z-scored inputs.

Usage: python3 scripts/ablation_standardize.py [--out results] [--n-events N]
"""
import argparse
import json
import logging
from pathlib import Path

from photonids.config import ExperimentConfig
from photonids.pipeline import run_experiment


def summarize(res):
    return {k: {"accuracy": r.report.accuracy, "roc_auc": r.report.roc_auc,
                "epochs_run": r.epochs_run} for k, r in res.configurations.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--n-events", type=int, default=25000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    base = ExperimentConfig().replace(**{"data.n_events": args.n_events})
    rows = {}
    for flag in (False, True):
        cfg = base.replace(**{"train.classifier.standardize_base_only": flag})
        rows[f"standardize_base_only={flag}"] = summarize(run_experiment(cfg, ("base_only",)))
        print(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation_standardize.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
