"""Derive the five task datasets from a manifest.

Images are split first, so every record of every task inherits its image's
split and no image can leak between train, validation and test.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .codec import Detection, SegmentationInstance, render_suffix
from .core import (
    BBox,
    DiagnosisLabel,
    ImageInfo,
    Manifest,
    PathologyAnnotation,
    annotation_mask,
    iter_image_annotations,
    mask_to_bbox,
)

TASKS = ("diagnosis", "detection", "report", "vqa", "segmentation")
SPLITS = ("train", "validation", "test")
SPLIT_RATIO = (8, 1, 1)

DIAGNOSIS_PROMPT = "What is the diagnosis in the X-ray image?"
REPORT_PROMPT = "Generate a medical report for the X-ray image provided."
NO_FINDINGS = "no findings"
NO_ABNORMALITY = "no abnormality"

VQA_CATEGORIES = ("abnormality", "presence", "position", "counting")


@dataclass(frozen=True)
class TaskRecord:
    task: str
    image_id: str
    prefix: str
    suffix: str
    split: str = ""
    index: int = 0
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def record_id(self) -> str:
        return f"{self.task}:{self.image_id}:{self.index}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "record_id": self.record_id,
            "image_id": self.image_id,
            "split": self.split,
            "prefix": self.prefix,
            "suffix": self.suffix,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TaskRecord":
        index = 0
        rid = d.get("record_id")
        if rid:
            index = int(str(rid).rsplit(":", 1)[-1])
        return cls(
            task=d["task"],
            image_id=str(d["image_id"]),
            prefix=d["prefix"],
            suffix=d["suffix"],
            split=d.get("split", ""),
            index=index,
            meta=dict(d.get("meta") or {}),
        )


def write_records(records: Iterable[TaskRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_records(path: str | Path) -> list[TaskRecord]:
    with open(path) as fh:
        return [TaskRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict[str, str]
    seed: int

    def ids(self, split: str) -> list[str]:
        return [i for i, s in self.assignment.items() if s == split]

    def sizes(self) -> dict[str, int]:
        return {s: len(self.ids(s)) for s in SPLITS}

    def to_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, **{s: self.ids(s) for s in SPLITS}}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SplitAssignment":
        assignment = {str(i): s for s in SPLITS for i in d.get(s, [])}
        return cls(assignment, int(d.get("seed", 0)))


def apportion(total: int, weights: Sequence[int | Fraction]) -> list[int]:
    """Largest-remainder apportionment; remainder ties go to the earlier slot."""
    weights = [Fraction(w) for w in weights]
    denom = sum(weights)
    quotas = [Fraction(total) * w / denom for w in weights]
    counts = [q.numerator // q.denominator for q in quotas]
    order = sorted(range(len(weights)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[: total - sum(counts)]:
        counts[k] += 1
    return counts


def split_images(manifest: Manifest, seed: int) -> SplitAssignment:
    ids = [i.image_id for i in manifest.images]
    if len(ids) < 10:
        raise ValueError(f"need at least 10 images to split 8:1:1, got {len(ids)}")
    random.Random(seed).shuffle(ids)
    n_train, n_val, _ = apportion(len(ids), SPLIT_RATIO)
    assignment = {}
    for pos, image_id in enumerate(ids):
        if pos < n_train:
            assignment[image_id] = "train"
        elif pos < n_train + n_val:
            assignment[image_id] = "validation"
        else:
            assignment[image_id] = "test"
    return SplitAssignment(assignment, seed)


# --------------------------------------------------------------------------
# helpers


def locate_zone(box: BBox, image: ImageInfo) -> tuple[str, str]:
    """Lung zone and patient side of a box centroid (image-left is patient-right)."""
    cy, cx = box.centroid
    if 3 * cy < image.height:
        zone = "upper"
    elif 3 * cy < 2 * image.height:
        zone = "middle"
    else:
        zone = "lower"
    side = "right" if 2 * cx < image.width else "left"
    return zone, side


def zone_phrase(box: BBox, image: ImageInfo) -> str:
    zone, side = locate_zone(box, image)
    return f"{zone} zone of the {side} lung"


def _boxes(image: ImageInfo, annotations: Sequence[PathologyAnnotation]) -> list[BBox]:
    return [mask_to_bbox(annotation_mask(a, image)) for a in annotations]


def _distinct(labels: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(labels))


def compose_report(image: ImageInfo, annotations: Sequence[PathologyAnnotation]) -> str:
    diagnosis = image.diagnosis.text if image.diagnosis else "unknown"
    if image.diagnosis is DiagnosisLabel.NORMAL or not annotations:
        findings = f"{NO_FINDINGS}."
    else:
        findings = " ".join(
            f"There is {a.pathology} in the {zone_phrase(box, image)}."
            for a, box in zip(annotations, _boxes(image, annotations))
        )
    return f"Findings: {findings} Impression: {diagnosis}."


def _assigned(manifest: Manifest, split: SplitAssignment):
    """Images in the split assignment, ordered by image id."""
    pairs = [(info, anns) for info, anns in iter_image_annotations(manifest) if info.image_id in split.assignment]
    return sorted(pairs, key=lambda p: p[0].image_id)


def _size_meta(image: ImageInfo) -> dict[str, int]:
    return {"height": image.height, "width": image.width}


# --------------------------------------------------------------------------
# builders


def build_diagnosis(manifest: Manifest, split: SplitAssignment) -> list[TaskRecord]:
    return [
        TaskRecord("diagnosis", info.image_id, DIAGNOSIS_PROMPT, info.diagnosis.text, split.assignment[info.image_id])
        for info, _ in _assigned(manifest, split)
    ]


def build_report(manifest: Manifest, split: SplitAssignment) -> list[TaskRecord]:
    return [
        TaskRecord("report", info.image_id, REPORT_PROMPT, compose_report(info, anns), split.assignment[info.image_id])
        for info, anns in _assigned(manifest, split)
    ]


def build_detection(manifest: Manifest, split: SplitAssignment) -> list[TaskRecord]:
    out = []
    for info, anns in _assigned(manifest, split):
        if not anns:
            continue
        prefix = "detect " + " ; ".join(_distinct(a.pathology for a in anns))
        dets = [Detection(a.pathology, box) for a, box in zip(anns, _boxes(info, anns))]
        suffix = render_suffix("detection", dets, info)
        out.append(TaskRecord("detection", info.image_id, prefix, suffix, split.assignment[info.image_id], meta=_size_meta(info)))
    return out


def build_segmentation(manifest: Manifest, split: SplitAssignment) -> list[TaskRecord]:
    prefix = "segment " + " ; ".join(manifest.vocabulary)
    out = []
    for info, anns in _assigned(manifest, split):
        if not anns:
            continue
        instances = []
        for a in anns:
            mask = annotation_mask(a, info)
            instances.append(SegmentationInstance(a.pathology, mask_to_bbox(mask), mask))
        suffix = render_suffix("segmentation", instances, info)
        out.append(TaskRecord("segmentation", info.image_id, prefix, suffix, split.assignment[info.image_id], meta=_size_meta(info)))
    return out


def build_vqa(manifest: Manifest, split: SplitAssignment, seed: int = 0) -> list[TaskRecord]:
    """Template questions in four categories.

    Per image: one open abnormality question and one closed negative presence
    question about an absent pathology chosen with ``seed``. Per present
    pathology: a closed presence question, a closed counting question and an
    open position question answered with the first instance's zone.
    """
    if not manifest.vocabulary:
        raise ValueError("VQA generation needs a nonempty pathology vocabulary")
    out = []
    for info, anns in _assigned(manifest, split):
        s = split.assignment[info.image_id]
        present = _distinct(a.pathology for a in anns)
        qa: list[tuple[str, str, str, bool]] = [
            (
                "What abnormalities are seen in the image?",
                ", ".join(present) if present else NO_ABNORMALITY,
                "abnormality",
                False,
            )
        ]
        boxes = _boxes(info, anns)
        for p in present:
            first = next(b for a, b in zip(anns, boxes) if a.pathology == p)
            count = sum(a.pathology == p for a in anns)
            qa.append((f"Is there {p} in the image?", "yes", "presence", True))
            qa.append((f"How many instances of {p} are in the image?", str(count), "counting", True))
            qa.append((f"Where is the {p} located?", zone_phrase(first, info), "position", False))
        absent = [v for v in manifest.vocabulary if v not in present]
        if absent:
            rng = random.Random(f"{seed}:{info.image_id}")
            qa.append((f"Is there {rng.choice(absent)} in the image?", "no", "presence", True))
        for k, (question, answer, category, closed) in enumerate(qa):
            meta = {"category": category, "closed": closed}
            out.append(TaskRecord("vqa", info.image_id, question, answer, s, k, meta))
    return out


def build_all(manifest: Manifest, split: SplitAssignment, vqa_seed: int = 0) -> dict[str, list[TaskRecord]]:
    return {
        "diagnosis": build_diagnosis(manifest, split),
        "detection": build_detection(manifest, split),
        "report": build_report(manifest, split),
        "vqa": build_vqa(manifest, split, vqa_seed),
        "segmentation": build_segmentation(manifest, split),
    }


def build_task(task: str, manifest: Manifest, split: SplitAssignment, vqa_seed: int = 0) -> list[TaskRecord]:
    if task == "vqa":
        return build_vqa(manifest, split, vqa_seed)
    builders = {
        "diagnosis": build_diagnosis,
        "detection": build_detection,
        "report": build_report,
        "segmentation": build_segmentation,
    }
    if task not in builders:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    return builders[task](manifest, split)
