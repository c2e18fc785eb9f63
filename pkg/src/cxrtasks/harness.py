"""Oracle predictor and the end-to-end pipeline runner."""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .codec import INSTANCE_SEPARATOR, LOC_BINS
from .core import DiagnosisLabel, Manifest, load_manifest, validate_manifest
from .datasets import SPLITS, TASKS, TaskRecord, build_all, split_images, write_records
from .evaluation import evaluate, write_predictions, write_report
from .mixture import build_schedule, compute_weights

_LOC_RE = re.compile(r"<loc(\d{4})>")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}]: {message}")
        self.stage = stage


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "perfect"
    drop_prob: float = 0.0
    jitter_bins: int = 0
    garble_prob: float = 0.0
    answer_flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("perfect", "corrupted"):
            raise ValueError(f"oracle mode must be 'perfect' or 'corrupted', not {self.mode!r}")
        for name in ("drop_prob", "garble_prob", "answer_flip_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.jitter_bins < 0:
            raise ValueError("jitter_bins must be non-negative")


def _jitter(segment: str, offsets: list[int]) -> str:
    it = iter(offsets)

    def shift(m: re.Match) -> str:
        idx = min(max(int(m.group(1)) + next(it, 0), 0), LOC_BINS - 1)
        return f"<loc{idx:04d}>"

    return _LOC_RE.sub(shift, segment, count=4)


def _garble(segment: str) -> str:
    # dropping the first location token leaves 3, which no parser accepts
    return _LOC_RE.sub("", segment, count=1)


def _flip_closed(answer: str) -> str:
    if answer == "yes":
        return "no"
    if answer == "no":
        return "yes"
    if answer.isdigit():
        return str(int(answer) + 1)
    return "no"


def oracle_predict(record: TaskRecord, manifest: Manifest | None, config: OracleConfig) -> str:
    """Replay the record's target, optionally corrupted.

    Corruption randomness comes from a stream keyed on the oracle seed and
    the record id, and every instance draws the same number of values
    whatever happens to it. Raising ``drop_prob`` alone therefore drops a
    superset of instances and leaves the survivors unchanged.
    """
    if manifest is not None:
        manifest.image(record.image_id)
    if config.mode == "perfect":
        return record.suffix
    rng = random.Random(f"{config.seed}:{record.record_id}")

    if record.task in ("detection", "segmentation"):
        kept = []
        for segment in record.suffix.split(INSTANCE_SEPARATOR):
            u_drop, u_garble = rng.random(), rng.random()
            offsets = [rng.randint(-config.jitter_bins, config.jitter_bins) for _ in range(4)]
            if u_drop < config.drop_prob:
                continue
            kept.append(_garble(segment) if u_garble < config.garble_prob else _jitter(segment, offsets))
        return INSTANCE_SEPARATOR.join(kept)

    u_flip = rng.random()
    if record.task == "diagnosis":
        others = [l.text for l in DiagnosisLabel if l.text != record.suffix]
        alt = rng.choice(others)
        return alt if u_flip < config.answer_flip_prob else record.suffix
    if record.task == "vqa" and record.meta.get("closed"):
        return _flip_closed(record.suffix) if u_flip < config.answer_flip_prob else record.suffix
    return record.suffix


def predict_records(records, manifest: Manifest | None, config: OracleConfig) -> list[dict[str, Any]]:
    return [
        {
            "record_id": r.record_id,
            "image_id": r.image_id,
            "task": r.task,
            "output": oracle_predict(r, manifest, config),
        }
        for r in records
    ]


@dataclass(frozen=True)
class PipelineRun:
    manifest_path: str
    out_dir: str
    seed: int = 0
    oracle: OracleConfig = field(default_factory=OracleConfig)
    vqa_seed: int | None = None
    schedule_seed: int | None = None
    batch_size: int = 16
    epoch_batches: int | None = None
    artifacts: tuple[str, ...] = ()


def run_pipeline(run: PipelineRun) -> tuple[dict[str, Any], PipelineRun]:
    """Split, build, schedule, predict on the test split and evaluate.

    Returns the evaluation report and the run record with its artifact list.
    Every stage failure is re-raised as a ``StageError`` naming the stage.
    """
    out = Path(run.out_dir)
    artifacts: list[str] = []

    def emit(rel: str) -> Path:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        artifacts.append(rel)
        return path

    stage = "load"
    try:
        manifest = load_manifest(run.manifest_path)

        stage = "validate"
        violations = validate_manifest(manifest)
        if violations:
            raise ValueError(f"{len(violations)} violation(s); first: {violations[0]}")

        stage = "split"
        split = split_images(manifest, run.seed)
        emit("split.json").write_text(json.dumps(split.to_dict(), indent=1) + "\n")

        stage = "build"
        vqa_seed = run.seed if run.vqa_seed is None else run.vqa_seed
        datasets = build_all(manifest, split, vqa_seed)
        for task in TASKS:
            for s in SPLITS:
                write_records([r for r in datasets[task] if r.split == s], emit(f"records/{task}/{s}.jsonl"))

        stage = "schedule"
        train_sizes = {t: sum(r.split == "train" for r in datasets[t]) for t in TASKS}
        train_sizes = {t: n for t, n in train_sizes.items() if n > 0}
        weights = compute_weights(train_sizes)
        n_batches = run.epoch_batches or max(
            math.ceil(sum(train_sizes.values()) / run.batch_size), len(train_sizes)
        )
        sched_seed = run.seed if run.schedule_seed is None else run.schedule_seed
        schedule = build_schedule(weights, train_sizes, run.batch_size, n_batches, sched_seed)
        schedule.write(emit("schedule.jsonl"))
        emit("mixture.json").write_text(
            json.dumps(
                {
                    "sizes": train_sizes,
                    "weights": {t: str(w) for t, w in weights.weights.items()},
                    "ratio": weights.ratio_string(),
                    "counts": schedule.counts(),
                },
                indent=1,
            )
            + "\n"
        )

        stage = "oracle"
        test_records = [r for t in TASKS for r in datasets[t] if r.split == "test"]
        predictions = predict_records(test_records, manifest, run.oracle)
        write_predictions(predictions, emit("predictions/test.jsonl"))

        stage = "eval"
        report = evaluate(test_records, predictions, manifest)
        write_report(report, emit("report.json"))
    except StageError:
        raise
    except (ValueError, KeyError, OSError, TypeError) as exc:
        raise StageError(stage, str(exc)) from exc

    finished = PipelineRun(**{**asdict(run), "oracle": run.oracle, "artifacts": tuple(artifacts + ["run.json"])})
    record = asdict(finished)
    # the record lives inside the output tree; a path there would break byte-identical reruns
    record["out_dir"] = "."
    record["artifacts"] = list(finished.artifacts)
    (out / "run.json").write_text(json.dumps(record, indent=1) + "\n")
    return report, finished
