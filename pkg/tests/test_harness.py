import json
import re

import pytest

from cxrtasks.core import save_manifest
from cxrtasks.datasets import build_all, build_detection, split_images
from cxrtasks.evaluation import evaluate
from cxrtasks.harness import OracleConfig, PipelineRun, StageError, oracle_predict, predict_records, run_pipeline
from cxrtasks.synthetic import make_manifest

LOC = re.compile(r"<loc(\d{4})>")


@pytest.fixture(scope="module")
def detection_records():
    m = make_manifest(400, seed=21)
    return m, build_detection(m, split_images(m, 0))


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(mode="noisy")
    with pytest.raises(ValueError):
        OracleConfig(drop_prob=1.5)
    with pytest.raises(ValueError):
        OracleConfig(jitter_bins=-1)


def test_perfect_mode_replays_suffix(synthetic_manifest):
    data = build_all(synthetic_manifest, split_images(synthetic_manifest, 0))
    cfg = OracleConfig(mode="perfect", drop_prob=1.0, answer_flip_prob=1.0)
    for records in data.values():
        for r in records[:20]:
            assert oracle_predict(r, synthetic_manifest, cfg) == r.suffix


def test_drop_all_gives_empty_output(detection_records):
    _, recs = detection_records
    cfg = OracleConfig(mode="corrupted", drop_prob=1.0)
    assert all(oracle_predict(r, None, cfg) == "" for r in recs)


def test_jitter_bound(detection_records):
    _, recs = detection_records
    cfg = OracleConfig(mode="corrupted", jitter_bins=2, seed=5)
    moved = 0
    for r in recs:
        gold = [int(v) for v in LOC.findall(r.suffix)]
        got = [int(v) for v in LOC.findall(oracle_predict(r, None, cfg))]
        assert len(got) == len(gold)
        assert all(abs(a - b) <= 2 for a, b in zip(gold, got))
        moved += gold != got
    assert moved > 0


def test_garble_makes_segments_unparseable(detection_records):
    _, recs = detection_records
    cfg = OracleConfig(mode="corrupted", garble_prob=1.0)
    report = evaluate(recs, predict_records(recs, None, cfg))
    assert report["detection"]["n_predicted"] == 0
    assert report["detection"]["parse_diagnostics"] == report["detection"]["n_gold"]


def test_answer_flip(synthetic_manifest):
    data = build_all(synthetic_manifest, split_images(synthetic_manifest, 0))
    cfg = OracleConfig(mode="corrupted", answer_flip_prob=1.0)
    for r in data["vqa"]:
        out = oracle_predict(r, None, cfg)
        assert (out != r.suffix) == bool(r.meta["closed"])
    for r in data["diagnosis"]:
        assert oracle_predict(r, None, cfg) != r.suffix


def test_half_drop_recall(detection_records):
    _, recs = detection_records
    cfg = OracleConfig(mode="corrupted", drop_prob=0.5, seed=1)
    det = evaluate(recs, predict_records(recs, None, cfg))["detection"]
    assert det["n_gold"] >= 500
    assert abs(det["recall"] - 0.5) <= 0.1


def test_recall_monotone_in_drop_prob(detection_records):
    _, recs = detection_records
    recalls = []
    for p in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
        cfg = OracleConfig(mode="corrupted", drop_prob=p, jitter_bins=3, seed=4)
        recalls.append(evaluate(recs, predict_records(recs, None, cfg))["detection"]["recall"])
    assert recalls == sorted(recalls, reverse=True)
    assert recalls[0] > 0.9 and recalls[-1] == 0.0


def test_pipeline_is_byte_identical(tmp_path):
    save_manifest(make_manifest(40, seed=2), tmp_path / "m.json")
    cfg = OracleConfig(mode="corrupted", drop_prob=0.3, jitter_bins=4, answer_flip_prob=0.2, seed=7)
    trees = []
    for name in ("a", "b"):
        report, run = run_pipeline(PipelineRun(str(tmp_path / "m.json"), str(tmp_path / name), seed=3, oracle=cfg))
        files = sorted(p.relative_to(tmp_path / name) for p in (tmp_path / name).rglob("*") if p.is_file())
        assert sorted(map(str, files)) == sorted(run.artifacts)
        trees.append({f: (tmp_path / name / f).read_bytes() for f in files})
    assert trees[0] == trees[1]
    record = json.loads(trees[0][next(f for f in trees[0] if str(f) == "run.json")])
    assert record["oracle"]["seed"] == 7 and record["seed"] == 3


def test_pipeline_errors_name_the_stage(tmp_path):
    with pytest.raises(StageError, match=r"^\[load\]"):
        run_pipeline(PipelineRun(str(tmp_path / "missing.json"), str(tmp_path / "out")))
    save_manifest(make_manifest(5, seed=0), tmp_path / "small.json")
    with pytest.raises(StageError, match=r"^\[split\]"):
        run_pipeline(PipelineRun(str(tmp_path / "small.json"), str(tmp_path / "out")))
