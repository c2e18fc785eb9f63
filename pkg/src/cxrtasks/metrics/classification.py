"""Accuracy with macro recall/precision for single-label classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

OTHER = "<other>"


@dataclass(frozen=True)
class ClassificationResult:
    accuracy: float
    macro_recall: float
    macro_precision: float
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)
    total: int = 0
    correct: int = 0


def classification_metrics(
    pairs: Iterable[tuple[str, str]], labels: Sequence[str]
) -> ClassificationResult:
    """Score ``(gold, predicted)`` pairs.

    Predictions outside ``labels`` become ``OTHER`` and are always wrong.
    Macro means run over classes that occur in the gold labels; a class
    with no predictions has precision 0.
    """
    known = set(labels)
    pairs = [(g, p if p in known else OTHER) for g, p in pairs]
    if not pairs:
        raise ValueError("classification_metrics needs at least one pair")

    confusion: dict[tuple[str, str], int] = {}
    for g, p in pairs:
        confusion[(g, p)] = confusion.get((g, p), 0) + 1

    gold_classes = [c for c in labels if any(g == c for g, _ in pairs)]
    gold_classes += sorted({g for g, _ in pairs} - set(gold_classes))

    per_class = {}
    for c in gold_classes:
        tp = confusion.get((c, c), 0)
        support = sum(n for (g, _), n in confusion.items() if g == c)
        predicted = sum(n for (_, p), n in confusion.items() if p == c)
        per_class[c] = {
            "recall": tp / support if support else 0.0,
            "precision": tp / predicted if predicted else 0.0,
            "support": support,
        }

    correct = sum(1 for g, p in pairs if g == p)
    n = len(gold_classes)
    return ClassificationResult(
        accuracy=correct / len(pairs),
        macro_recall=sum(v["recall"] for v in per_class.values()) / n,
        macro_precision=sum(v["precision"] for v in per_class.values()) / n,
        per_class=per_class,
        confusion=confusion,
        total=len(pairs),
        correct=correct,
    )
