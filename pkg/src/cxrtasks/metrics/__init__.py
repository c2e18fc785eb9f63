from .classification import ClassificationResult, classification_metrics
from .detection import APResult, ClassAP, average_precision, map_at_50
from .loss import loss_mask, sequence_nll
from .text import bleu4, meteor_lite, rouge_l, tokenize
from .vqa import evaluate_vqa

__all__ = [
    "APResult",
    "ClassAP",
    "ClassificationResult",
    "average_precision",
    "bleu4",
    "classification_metrics",
    "evaluate_vqa",
    "loss_mask",
    "map_at_50",
    "meteor_lite",
    "rouge_l",
    "sequence_nll",
    "tokenize",
]
