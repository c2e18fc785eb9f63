"""Metric sensitivity to oracle corruption.

Builds every task dataset from a synthetic manifest once, then scores the
corrupted oracle on the chosen split for each setting of one knob while the
others stay at zero. Prints one JSON line per setting.

    python scripts/corruption_sweep.py --images 300 --knob drop_prob
    python scripts/corruption_sweep.py --knob jitter_bins --values 0 2 5 10 20 50
"""

import argparse
import json
from dataclasses import asdict, dataclass, field

from cxrtasks.datasets import build_all, split_images
from cxrtasks.evaluation import evaluate, round_floats
from cxrtasks.harness import OracleConfig, predict_records
from cxrtasks.synthetic import make_manifest

DEFAULT_VALUES = {
    "drop_prob": [0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
    "jitter_bins": [0, 2, 5, 10, 20, 50],
    "garble_prob": [0.0, 0.1, 0.25, 0.5, 1.0],
    "answer_flip_prob": [0.0, 0.1, 0.25, 0.5, 1.0],
}


@dataclass
class SweepConfig:
    images: int = 300
    manifest_seed: int = 0
    split_seed: int = 0
    oracle_seed: int = 0
    split: str = "all"
    knob: str = "drop_prob"
    values: list = field(default_factory=list)


def headline(report: dict) -> dict:
    return {
        "diagnosis_acc": report["diagnosis"]["accuracy"],
        "vqa_closed_acc": report["vqa"]["closed_accuracy"],
        "detection_map": report["detection"]["map"],
        "detection_recall": report["detection"]["recall"],
        "segmentation_map": report["segmentation"]["map"],
        "report_bleu4": report["report"]["bleu4"],
    }


def sweep(cfg: SweepConfig):
    manifest = make_manifest(cfg.images, seed=cfg.manifest_seed)
    data = build_all(manifest, split_images(manifest, cfg.split_seed), cfg.split_seed)
    records = [r for recs in data.values() for r in recs if cfg.split == "all" or r.split == cfg.split]
    for value in cfg.values or DEFAULT_VALUES[cfg.knob]:
        oracle = OracleConfig(mode="corrupted", seed=cfg.oracle_seed, **{cfg.knob: value})
        report = evaluate(records, predict_records(records, manifest, oracle), manifest)
        yield {cfg.knob: value, **round_floats(headline(report), 4)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", type=int, default=300)
    ap.add_argument("--manifest-seed", type=int, default=0)
    ap.add_argument("--split-seed", type=int, default=0)
    ap.add_argument("--oracle-seed", type=int, default=0)
    ap.add_argument("--split", default="all", choices=("all", "train", "validation", "test"))
    ap.add_argument("--knob", default="drop_prob", choices=sorted(DEFAULT_VALUES))
    ap.add_argument("--values", nargs="+", type=float, default=[])
    args = ap.parse_args()
    values = [int(v) for v in args.values] if args.knob == "jitter_bins" else args.values
    cfg = SweepConfig(args.images, args.manifest_seed, args.split_seed, args.oracle_seed, args.split, args.knob, values)
    print(json.dumps({"config": asdict(cfg)}))
    for row in sweep(cfg):
        print(json.dumps(row))


if __name__ == "__main__":
    main()
