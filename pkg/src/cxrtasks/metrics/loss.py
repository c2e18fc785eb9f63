"""Masked sequence negative log-likelihood."""

from __future__ import annotations

import math
from typing import Sequence


def loss_mask(n_image: int, n_prompt: int, n_response: int) -> list[int]:
    """Per-token weights: 0 on image and prompt tokens, 1 on response tokens."""
    if min(n_image, n_prompt, n_response) < 0:
        raise ValueError("token counts must be non-negative")
    return [0] * (n_image + n_prompt) + [1] * n_response


def sequence_nll(token_probs: Sequence[float], mask: Sequence[int]) -> float:
    """``-sum(w * log p)`` over positions, natural log.

    ``token_probs[l]`` is the model probability of the correct token at
    position ``l`` given everything before it.
    """
    if len(token_probs) != len(mask):
        raise ValueError(f"length mismatch: {len(token_probs)} probabilities, {len(mask)} weights")
    terms = []
    for p, w in zip(token_probs, mask):
        if w not in (0, 1):
            raise ValueError(f"loss weights must be 0 or 1, got {w!r}")
        if not 0 < p <= 1:
            raise ValueError(f"token probability must lie in (0, 1], got {p!r}")
        if w:
            terms.append(-math.log(p))
    return math.fsum(terms)
