"""Text generation metrics: corpus BLEU-4, ROUGE-L and a METEOR variant.

All three share one tokenizer: lowercase, punctuation split off into its own
tokens, whitespace split.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from functools import lru_cache
from typing import Sequence

from nltk.stem.porter import PorterStemmer

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _check_corpus(references: Sequence[str], hypotheses: Sequence[str]) -> None:
    if len(references) != len(hypotheses):
        raise ValueError(f"{len(references)} references vs {len(hypotheses)} hypotheses")
    if not references:
        raise ValueError("empty corpus")


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(references: Sequence[str], hypotheses: Sequence[str]) -> float:
    """Corpus BLEU-4 with one reference per hypothesis and no smoothing."""
    _check_corpus(references, hypotheses)
    matches = [0] * 4
    totals = [0] * 4
    ref_len = hyp_len = 0
    for ref, hyp in zip(references, hypotheses):
        r, h = tokenize(ref), tokenize(hyp)
        ref_len += len(r)
        hyp_len += len(h)
        for n in range(1, 5):
            h_ngrams, r_ngrams = _ngrams(h, n), _ngrams(r, n)
            matches[n - 1] += sum(min(c, r_ngrams[g]) for g, c in h_ngrams.items())
            totals[n - 1] += max(len(h) - n + 1, 0)
    if min(matches) == 0:
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals)) / 4
    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * math.exp(log_precision)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(reference: str, hypothesis: str) -> float:
    r, h = tokenize(reference), tokenize(hypothesis)
    lcs = lcs_length(h, r)
    if lcs == 0:
        return 0.0
    p, rec = lcs / len(h), lcs / len(r)
    return 2 * p * rec / (p + rec)


def rouge_l(references: Sequence[str], hypotheses: Sequence[str]) -> float:
    """Mean per-pair ROUGE-L F1."""
    _check_corpus(references, hypotheses)
    return sum(rouge_l_pair(r, h) for r, h in zip(references, hypotheses)) / len(references)


_STEMMER = PorterStemmer()


@lru_cache(maxsize=4096)
def _stem(word: str) -> str:
    return _STEMMER.stem(word)


def align(reference: list[str], hypothesis: list[str]) -> list[tuple[int, int]]:
    """Unigram alignment: exact matches first, then Porter-stem matches.

    Each stage walks the hypothesis left to right and takes the first unused
    reference position that matches. Returns ``(hyp_idx, ref_idx)`` pairs
    sorted by hypothesis position.
    """
    used_h: set[int] = set()
    used_r: set[int] = set()
    pairs = []
    for key in (lambda w: w, _stem):
        ref_keys = [key(w) for w in reference]
        for i, w in enumerate(hypothesis):
            if i in used_h:
                continue
            k = key(w)
            for j, rk in enumerate(ref_keys):
                if j not in used_r and rk == k:
                    pairs.append((i, j))
                    used_h.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def count_chunks(alignment: list[tuple[int, int]]) -> int:
    """Runs of matches adjacent in both hypothesis and reference."""
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_pair(reference: str, hypothesis: str) -> float:
    r, h = tokenize(reference), tokenize(hypothesis)
    alignment = align(r, h)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, rec = m / len(h), m / len(r)
    f_mean = p * rec / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * rec)
    penalty = METEOR_GAMMA * (count_chunks(alignment) / m) ** METEOR_BETA
    return f_mean * (1 - penalty)


def meteor_lite(references: Sequence[str], hypotheses: Sequence[str]) -> float:
    """Mean per-pair METEOR with exact and stem matching only (no synonyms)."""
    _check_corpus(references, hypotheses)
    return sum(meteor_pair(r, h) for r, h in zip(references, hypotheses)) / len(references)
