"""VQA scoring: closed questions by exact normalized match, open by text metrics."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from ..parsing import normalize_answer
from .classification import classification_metrics
from .text import bleu4, meteor_lite, rouge_l


def evaluate_vqa(records: Sequence, predictions: Mapping[str, str]) -> dict[str, Any]:
    """Score VQA records against predictions keyed by ``record_id``.

    A missing prediction counts as wrong on a closed question and as an
    empty hypothesis on an open one.
    """
    closed = [r for r in records if r.meta.get("closed")]
    open_ = [r for r in records if not r.meta.get("closed")]
    out: dict[str, Any] = {"n_closed": len(closed), "n_open": len(open_)}

    if closed:
        pairs = [
            (normalize_answer(r.suffix), normalize_answer(predictions.get(r.record_id, "")))
            for r in closed
        ]
        labels = sorted({g for g, _ in pairs})
        cls = classification_metrics(pairs, labels)
        out["closed_accuracy"] = cls.accuracy
        out["closed_correct"] = cls.correct
        out["macro_recall"] = cls.macro_recall
        out["macro_precision"] = cls.macro_precision
        per_category: dict[str, dict[str, float]] = {}
        for r, (g, p) in zip(closed, pairs):
            cat = per_category.setdefault(r.meta.get("category", "unknown"), {"correct": 0, "total": 0})
            cat["total"] += 1
            cat["correct"] += int(g == p)
        for cat in per_category.values():
            cat["accuracy"] = cat["correct"] / cat["total"]
        out["per_category"] = dict(sorted(per_category.items()))

    if open_:
        refs = [r.suffix for r in open_]
        hyps = [predictions.get(r.record_id, "") for r in open_]
        out["bleu4"] = bleu4(refs, hyps)
        out["meteor"] = meteor_lite(refs, hyps)
        out["rouge_l"] = rouge_l(refs, hyps)
    return out
