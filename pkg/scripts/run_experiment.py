"""Full four-configuration experiment at the default config; writes results/ reports.

Usage: python3 scripts/run_experiment.py [--out results] [key=value ...]
"""
import argparse
import json
import logging
from pathlib import Path

from photonids.config import ExperimentConfig
from photonids.metrics import dumps
from photonids.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("overrides", nargs="*", help="config overrides as key=value")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = ExperimentConfig().replace(**dict(o.split("=", 1) for o in args.overrides))
    res = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "experiment.json").write_text(dumps(res.summary()))
    (out / "config.txt").write_text(cfg.to_text())
    lines = ["raw CNN output vs anchored targets", res.raw_regression.to_text(), "",
             "after PCHIP calibration", res.calibrated_regression.to_text(), ""]
    for name, r in res.configurations.items():
        lines += [f"[{name}] silhouette {r.silhouette:.4f}, epochs {r.epochs_run}", r.report.to_text(), ""]
    text = "\n".join(lines)
    (out / "experiment.txt").write_text(text)
    print(text)
    print(json.dumps({k: round(v, 1) for k, v in res.timings.items()}))


if __name__ == "__main__":
    main()
