"""mAP at IoU > 0.5 for boxes or masks.

Generative outputs carry no confidence scores, so a prediction's rank is its
emission position within its image; equal positions across images are
ordered by image id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..core import iou

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class ClassAP:
    label: str
    ap: float
    n_gold: int
    tp_flags: tuple[bool, ...]
    precision: tuple[float, ...]
    recall: tuple[float, ...]

    @property
    def tp(self) -> int:
        return sum(self.tp_flags)


@dataclass(frozen=True)
class APResult:
    map: float
    per_class: dict[str, ClassAP] = field(default_factory=dict)

    @property
    def total_gold(self) -> int:
        return sum(c.n_gold for c in self.per_class.values())

    @property
    def total_tp(self) -> int:
        return sum(c.tp for c in self.per_class.values())

    @property
    def recall(self) -> float:
        return self.total_tp / self.total_gold if self.total_gold else 0.0


def _geometry(instance, kind: str):
    return instance.mask if kind == "mask" else instance.box


def average_precision(tp_flags: Sequence[bool], n_gold: int) -> tuple[float, list[float], list[float]]:
    """All-point interpolated AP of a ranked TP/FP list."""
    precision, recall = [], []
    tp = 0
    for k, flag in enumerate(tp_flags, start=1):
        tp += bool(flag)
        precision.append(tp / k)
        recall.append(tp / n_gold)
    envelope = precision[:]
    for k in range(len(envelope) - 2, -1, -1):
        envelope[k] = max(envelope[k], envelope[k + 1])
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev_recall) * p
        prev_recall = r
    return ap, precision, recall


def map_at_50(
    gold: Mapping[str, Sequence],
    predicted: Mapping[str, Sequence],
    kind: str = "box",
) -> APResult:
    """Mean over gold classes of per-class AP.

    Within a class, predictions are visited in rank order. Each one claims
    the unmatched same-class gold instance in its image with the highest
    IoU, if that IoU exceeds 0.5; otherwise it is a false positive. A
    wrong-class overlap is therefore an FP of its own class and leaves the
    gold instance unmatched. Classes without gold instances are ignored.
    """
    if kind not in ("box", "mask"):
        raise ValueError(f"kind must be 'box' or 'mask', not {kind!r}")
    image_ids = sorted(set(gold) | set(predicted))
    classes = sorted({inst.label for insts in gold.values() for inst in insts})

    ranked = sorted(
        (
            (rank, order, image_id, inst)
            for order, image_id in enumerate(image_ids)
            for rank, inst in enumerate(predicted.get(image_id, ()))
        ),
        key=lambda t: (t[0], t[1]),
    )

    per_class = {}
    for c in classes:
        gold_c = {
            image_id: [g for g in gold.get(image_id, ()) if g.label == c] for image_id in image_ids
        }
        n_gold = sum(len(v) for v in gold_c.values())
        matched = {image_id: [False] * len(v) for image_id, v in gold_c.items()}
        flags = []
        for _, _, image_id, inst in ranked:
            if inst.label != c:
                continue
            best, best_iou = None, IOU_THRESHOLD
            for j, g in enumerate(gold_c[image_id]):
                if matched[image_id][j]:
                    continue
                v = iou(_geometry(inst, kind), _geometry(g, kind))
                if v > best_iou:
                    best, best_iou = j, v
            if best is None:
                flags.append(False)
            else:
                matched[image_id][best] = True
                flags.append(True)
        ap, precision, recall = average_precision(flags, n_gold)
        per_class[c] = ClassAP(c, ap, n_gold, tuple(flags), tuple(precision), tuple(recall))

    m = sum(v.ap for v in per_class.values()) / len(per_class) if per_class else 0.0
    return APResult(m, per_class)
