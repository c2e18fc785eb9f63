import itertools
import math
import random
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st
from nltk.translate.bleu_score import corpus_bleu

from cxrtasks.datasets import TaskRecord
from cxrtasks.metrics import (
    bleu4,
    classification_metrics,
    evaluate_vqa,
    loss_mask,
    meteor_lite,
    rouge_l,
    sequence_nll,
)
from cxrtasks.metrics.text import align, count_chunks, lcs_length, tokenize

# --- classification --------------------------------------------------------


def test_hand_confusion_case():
    res = classification_metrics([("A", "A"), ("A", "B"), ("B", "B")], ["A", "B", "C"])
    assert res.accuracy == 2 / 3
    assert res.macro_recall == 3 / 4
    assert res.macro_precision == 3 / 4
    assert "C" not in res.per_class


def test_all_correct_and_out_of_set():
    res = classification_metrics([("x", "x"), ("y", "y")], ["x", "y"])
    assert (res.accuracy, res.macro_recall, res.macro_precision) == (1.0, 1.0, 1.0)
    res = classification_metrics([("x", "banana")], ["x"])
    assert res.accuracy == 0.0 and res.confusion == {("x", "<other>"): 1}
    with pytest.raises(ValueError):
        classification_metrics([], ["x"])


labels4 = st.sampled_from("abcd")


@given(st.lists(st.tuples(labels4, labels4), min_size=1, max_size=40), st.permutations("abcd"))
def test_accuracy_invariant_under_relabeling(pairs, perm):
    rename = dict(zip("abcd", perm))
    res = classification_metrics(pairs, list("abcd"))
    moved = classification_metrics([(rename[g], rename[p]) for g, p in pairs], list("abcd"))
    assert res.accuracy == moved.accuracy
    assert math.isclose(res.macro_recall, moved.macro_recall, abs_tol=1e-12)
    for v in (res.accuracy, res.macro_recall, res.macro_precision):
        assert 0.0 <= v <= 1.0


# --- BLEU ------------------------------------------------------------------


def test_bleu_fixtures():
    assert bleu4(["a b c d e"], ["a b c d"]) == pytest.approx(math.exp(-0.25), abs=1e-12)
    assert bleu4(["the cat sat on the mat"], ["the cat sat on the mat"]) == 1.0
    assert bleu4(["a b c d"], ["e f g h"]) == 0.0
    with pytest.raises(ValueError):
        bleu4([], [])
    with pytest.raises(ValueError):
        bleu4(["a"], [])


words = st.lists(st.sampled_from("a b c d e f".split()), min_size=0, max_size=12).map(" ".join)


long_words = st.lists(st.sampled_from("a b c d e f".split()), min_size=4, max_size=12).map(" ".join)


# nltk counts at least one n-gram per hypothesis even when it has fewer than n
# tokens, so it is only an oracle for hypotheses of four tokens or more
@given(st.lists(st.tuples(words, long_words), min_size=1, max_size=5))
def test_bleu_matches_nltk(pairs):
    refs = [r for r, _ in pairs]
    hyps = [h for _, h in pairs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        expected = corpus_bleu([[tokenize(r)] for r in refs], [tokenize(h) for h in hyps])
    assert bleu4(refs, hyps) == pytest.approx(expected, abs=1e-12)


# --- ROUGE-L ---------------------------------------------------------------


def test_rouge_fixtures():
    assert rouge_l(["the cat sat"], ["the cat"]) == pytest.approx(0.8, abs=1e-12)
    assert rouge_l(["x y"], ["x y"]) == 1.0
    assert rouge_l(["x y"], [""]) == 0.0


def _lcs_brute(a, b):
    for k in range(min(len(a), len(b)), 0, -1):
        subs = set(itertools.combinations(a, k))
        if any(c in subs for c in itertools.combinations(b, k)):
            return k
    return 0


@given(st.lists(st.sampled_from("abc"), max_size=7), st.lists(st.sampled_from("abc"), max_size=7))
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == _lcs_brute(a, b)


# --- METEOR ----------------------------------------------------------------


def test_meteor_identical_three_tokens():
    assert meteor_lite(["a b c"], ["a b c"]) == pytest.approx(1 - 0.5 / 27, abs=1e-12)


def test_meteor_zero_and_stem_match():
    assert meteor_lite(["a b"], ["c d"]) == 0.0
    assert align(["walking"], ["walked"]) == [(0, 0)]
    assert meteor_lite(["walking"], ["walked"]) == pytest.approx(0.5, abs=1e-12)


def test_meteor_chunk_count():
    # hyp "b a" vs ref "a b": two matches in two chunks
    alignment = align(["a", "b"], ["b", "a"])
    assert alignment == [(0, 1), (1, 0)]
    assert count_chunks(alignment) == 2
    assert meteor_lite(["a b"], ["b a"]) == pytest.approx(1 - 0.5, abs=1e-12)


@given(st.lists(st.sampled_from("a b c d e".split()), min_size=1, max_size=10).map(" ".join))
def test_identity_scores(text):
    n = len(tokenize(text))
    assert bleu4([text], [text]) == (1.0 if n >= 4 else 0.0)
    assert rouge_l([text], [text]) == 1.0
    assert meteor_lite([text], [text]) == pytest.approx(1 - 0.5 / n**3, abs=1e-12)


@given(st.lists(st.tuples(words, words), min_size=1, max_size=4))
def test_text_metrics_in_unit_interval(pairs):
    refs = [r for r, _ in pairs]
    hyps = [h for _, h in pairs]
    for f in (bleu4, rouge_l, meteor_lite):
        assert 0.0 <= f(refs, hyps) <= 1.0


# --- loss ------------------------------------------------------------------


def test_nll_fixtures():
    assert sequence_nll([1.0, 1.0], [1, 1]) == 0.0
    assert sequence_nll([math.exp(-2)], [1]) == 2.0
    e1 = math.exp(-1)
    assert sequence_nll([e1, e1, e1], [0, 1, 1]) == 2.0


def test_loss_mask_layout():
    assert loss_mask(2, 3, 2) == [0, 0, 0, 0, 0, 1, 1]


def test_nll_errors():
    with pytest.raises(ValueError):
        sequence_nll([0.0], [1])
    with pytest.raises(ValueError):
        sequence_nll([0.5], [1, 1])
    with pytest.raises(ValueError):
        sequence_nll([1.5], [1])


@given(
    st.lists(st.tuples(st.floats(1e-9, 1.0), st.sampled_from([0, 1])), min_size=1, max_size=60),
    st.data(),
)
def test_nll_additive_over_concatenation(seq, data):
    cut = data.draw(st.integers(0, len(seq)))
    probs = [p for p, _ in seq]
    mask = [w for _, w in seq]
    whole = sequence_nll(probs, mask)
    parts = sequence_nll(probs[:cut], mask[:cut]) + sequence_nll(probs[cut:], mask[cut:])
    assert abs(whole - parts) <= 1e-12 * max(1.0, whole)
    assert whole >= 0.0


# --- VQA -------------------------------------------------------------------


def _vqa(k, answer, category, closed):
    return TaskRecord("vqa", "img", f"q{k}", answer, "test", k, {"category": category, "closed": closed})


def test_evaluate_vqa_normalization_and_categories():
    recs = [
        _vqa(0, "yes", "presence", True),
        _vqa(1, "2", "counting", True),
        _vqa(2, "no", "presence", True),
        _vqa(3, "upper zone of the left lung", "position", False),
    ]
    preds = {recs[0].record_id: "Yes.", recs[1].record_id: "two", recs[3].record_id: "upper zone of the left lung"}
    out = evaluate_vqa(recs, preds)
    assert out["n_closed"] == 3 and out["n_open"] == 1
    assert out["closed_correct"] == 2
    assert out["per_category"]["presence"] == {"correct": 1, "total": 2, "accuracy": 0.5}
    assert out["per_category"]["counting"]["accuracy"] == 1.0
    assert sum(c["total"] for c in out["per_category"].values()) == out["n_closed"]
    assert out["bleu4"] == 1.0 and out["rouge_l"] == 1.0


@given(st.lists(st.tuples(st.sampled_from(["yes", "no", "1", "2"]), st.booleans()), min_size=1, max_size=20), st.data())
def test_adding_correct_answer_never_lowers_numerator(items, data):
    recs = [_vqa(k, a, "presence", True) for k, (a, _) in enumerate(items)]
    preds = {r.record_id: (r.suffix if ok else "maybe") for r, (_, ok) in zip(recs, items)}
    before = evaluate_vqa(recs, preds)["closed_correct"]
    k = data.draw(st.integers(0, len(recs) - 1))
    preds[recs[k].record_id] = recs[k].suffix
    assert evaluate_vqa(recs, preds)["closed_correct"] >= before


def test_random_corpus_is_deterministic():
    rng = random.Random(0)
    refs = [" ".join(rng.choices("abcdef", k=8)) for _ in range(20)]
    hyps = [" ".join(rng.choices("abcdef", k=7)) for _ in range(20)]
    assert meteor_lite(refs, hyps) == meteor_lite(refs, hyps)
