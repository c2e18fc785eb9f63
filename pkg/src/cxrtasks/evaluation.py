"""Assemble per-task evaluation reports from gold records and raw predictions."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .codec import Detection, SegmentationInstance
from .core import DiagnosisLabel, ImageInfo, Manifest, annotation_mask, mask_to_bbox
from .datasets import TASKS, TaskRecord
from .metrics import bleu4, classification_metrics, evaluate_vqa, map_at_50, meteor_lite, rouge_l
from .parsing import parse_detection, parse_diagnosis, parse_segmentation

DIAGNOSIS_LABELS = tuple(label.text for label in DiagnosisLabel)


def read_predictions(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_predictions(predictions: Iterable[Mapping[str, Any]], path: str | Path) -> None:
    with open(path, "w") as fh:
        for p in predictions:
            fh.write(json.dumps(dict(p)) + "\n")


def match_predictions(records: Sequence[TaskRecord], predictions: Iterable[Mapping[str, Any]]) -> dict[str, str]:
    """Map ``record_id`` to raw output.

    Predictions without a ``record_id`` are matched to records of the same
    task and image in file order.
    """
    out: dict[str, str] = {}
    queues: dict[tuple[str, str], list[str]] = {}
    for r in records:
        queues.setdefault((r.task, r.image_id), []).append(r.record_id)
    for p in predictions:
        rid = p.get("record_id")
        if rid is None:
            queue = queues.get((p.get("task"), str(p.get("image_id"))), [])
            rid = next((q for q in queue if q not in out), None)
        if rid is not None and rid not in out:
            out[rid] = str(p.get("output", ""))
    return out


def _image_for(record: TaskRecord, manifest: Manifest | None) -> ImageInfo:
    if manifest is not None:
        return manifest.image(record.image_id)
    return ImageInfo(record.image_id, int(record.meta["width"]), int(record.meta["height"]))


def _gold_instances(record: TaskRecord, image: ImageInfo, manifest: Manifest | None, task: str) -> list:
    if manifest is None:
        parsed = (parse_detection if task == "detection" else parse_segmentation)(record.suffix, image)
        return list(parsed.payload)
    out = []
    for ann in manifest.annotations_for(record.image_id):
        mask = annotation_mask(ann, image)
        box = mask_to_bbox(mask)
        out.append(Detection(ann.pathology, box) if task == "detection" else SegmentationInstance(ann.pathology, box, mask))
    return out


def _evaluate_localization(records, outputs, manifest, task) -> dict[str, Any]:
    gold, pred = {}, {}
    n_pred = n_diag = 0
    parse = parse_detection if task == "detection" else parse_segmentation
    for r in records:
        image = _image_for(r, manifest)
        gold[r.image_id] = _gold_instances(r, image, manifest, task)
        parsed = parse(outputs.get(r.record_id, ""), image)
        pred[r.image_id] = list(parsed.payload)
        n_pred += len(parsed.payload)
        n_diag += len(parsed.diagnostics)
    res = map_at_50(gold, pred, kind="box" if task == "detection" else "mask")
    return {
        "map": res.map,
        "recall": res.recall,
        "n_gold": res.total_gold,
        "n_predicted": n_pred,
        "n_true_positive": res.total_tp,
        "parse_diagnostics": n_diag,
        "per_class": {c: v.ap for c, v in res.per_class.items()},
    }


def evaluate(
    records: Sequence[TaskRecord],
    predictions: Iterable[Mapping[str, Any]],
    manifest: Manifest | None = None,
) -> dict[str, Any]:
    """Build the evaluation report, one section per task present in ``records``.

    With a manifest, detection and segmentation gold comes from the original
    annotation geometry; without one, from decoding the gold suffixes.
    """
    outputs = match_predictions(records, predictions)
    by_task: dict[str, list[TaskRecord]] = {}
    for r in records:
        by_task.setdefault(r.task, []).append(r)

    report: dict[str, Any] = {}
    for task in TASKS:
        recs = by_task.get(task)
        if not recs:
            continue
        if task == "diagnosis":
            pairs = []
            for r in recs:
                parsed = parse_diagnosis(outputs.get(r.record_id, ""))
                pairs.append((r.suffix, parsed.payload.text if parsed.payload else "<unparsed>"))
            cls = classification_metrics(pairs, DIAGNOSIS_LABELS)
            report[task] = {
                "accuracy": cls.accuracy,
                "macro_recall": cls.macro_recall,
                "macro_precision": cls.macro_precision,
                "n": cls.total,
                "per_class": cls.per_class,
            }
        elif task == "report":
            refs = [r.suffix for r in recs]
            hyps = [outputs.get(r.record_id, "") for r in recs]
            report[task] = {
                "bleu4": bleu4(refs, hyps),
                "meteor": meteor_lite(refs, hyps),
                "rouge_l": rouge_l(refs, hyps),
                "n": len(recs),
            }
        elif task == "vqa":
            report[task] = evaluate_vqa(recs, outputs)
        else:
            report[task] = _evaluate_localization(recs, outputs, manifest, task)
    return report


def round_floats(obj: Any, digits: int = 6) -> Any:
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def write_report(report: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(round_floats(dict(report)), indent=2) + "\n")
