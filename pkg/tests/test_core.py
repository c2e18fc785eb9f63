import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from matplotlib.path import Path as MplPath

from cxrtasks.core import (
    RLE,
    BBox,
    BinaryMask,
    DiagnosisLabel,
    GeometryError,
    ImageInfo,
    Manifest,
    ManifestError,
    PathologyAnnotation,
    Polygons,
    iou,
    load_manifest,
    mask_to_bbox,
    mask_to_rle,
    rasterize,
    save_manifest,
    validate_manifest,
)

from .conftest import rect


# --- validate_manifest -----------------------------------------------------


def test_valid_manifest_has_no_violations(tiny_manifest):
    assert validate_manifest(tiny_manifest) == []


def test_dangling_annotation(tiny_manifest):
    bad = Manifest(
        tiny_manifest.images,
        tiny_manifest.annotations + (PathologyAnnotation("zzz", "consolidation", rect(1, 1, 5, 5)),),
        tiny_manifest.vocabulary,
    )
    v = validate_manifest(bad)
    assert [x.kind for x in v] == ["dangling annotation"]
    assert v[0].image_id == "zzz"


def test_duplicate_image_id(tiny_manifest):
    dup = Manifest(tiny_manifest.images + (tiny_manifest.images[0],), tiny_manifest.annotations, tiny_manifest.vocabulary)
    v = validate_manifest(dup)
    assert len(v) == 1
    assert v[0].kind == "duplicate id" and v[0].image_id == "a"


def test_other_violations_are_reported(tiny_manifest):
    images = tiny_manifest.images + (ImageInfo("c", 0, 10, DiagnosisLabel.NORMAL),)
    anns = tiny_manifest.annotations + (
        PathologyAnnotation("a", "tumour", rect(1, 1, 5, 5)),
        PathologyAnnotation("a", "cavitation", RLE((100 * 100,))),
        PathologyAnnotation("a", "cavitation", Polygons((((1, 1), (5, 5)),))),
    )
    kinds = sorted(v.kind for v in validate_manifest(Manifest(images, anns, tiny_manifest.vocabulary)))
    assert kinds == ["bad dimensions", "bad geometry", "empty mask", "unknown pathology"]


def test_manifest_json_round_trip(tmp_path, tiny_manifest):
    extra = PathologyAnnotation("b", "cavitation", RLE(mask_to_rle(rasterize(rect(5, 5, 50, 20), 200, 100))))
    m = Manifest(tiny_manifest.images, tiny_manifest.annotations + (extra,), tiny_manifest.vocabulary)
    path = tmp_path / "m.json"
    save_manifest(m, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"images", "annotations", "vocabulary"}
    assert {"id", "width", "height", "quality", "diagnosis"} <= set(doc["images"][0])
    assert "polygon" in doc["annotations"][0] and "rle" in doc["annotations"][-1]
    assert load_manifest(path) == m


def test_manifest_multi_ring_polygon():
    doc = {
        "images": [{"id": "x", "width": 10, "height": 10, "quality": "good", "diagnosis": "active_tb"}],
        "annotations": [
            {"image_id": "x", "pathology": "p", "polygon": [[[0, 0], [2, 0], [2, 2], [0, 2]], [[5, 5], [7, 5], [7, 7], [5, 7]]]}
        ],
        "vocabulary": ["p"],
    }
    m = Manifest.from_dict(doc)
    assert rasterize(m.annotations[0].geometry, 10, 10).count == 8


def test_malformed_manifest_raises():
    with pytest.raises(ManifestError):
        Manifest.from_dict({"images": [{"id": "x"}]})


def test_diagnosis_label_forms():
    assert DiagnosisLabel.parse("active_tb") is DiagnosisLabel.ACTIVE_TB
    assert DiagnosisLabel.parse("Sick but no TB") is DiagnosisLabel.SICK_BUT_NO_TB
    assert [l.text for l in DiagnosisLabel] == ["active TB", "inactive TB", "normal", "sick but no TB"]
    with pytest.raises(ValueError):
        DiagnosisLabel.parse("pneumonia")


# --- rasterize -------------------------------------------------------------


def test_rectangle_polygon_bit_count():
    mask = rasterize(Polygons((((2, 2), (6, 2), (6, 5), (2, 5)),)), 8, 8)
    assert mask.count == 12
    assert mask.bits[2:5, 2:6].all()


def test_rle_all_zero_and_all_one():
    assert rasterize(RLE((64,)), 8, 8).count == 0
    assert rasterize(RLE((0, 64)), 8, 8).count == 64


def test_rle_is_column_major():
    # 3 rows x 2 cols: skip 1, set 2 -> pixels (1,0), (2,0)
    mask = rasterize(RLE((1, 2, 3)), 2, 3)
    assert mask.bits.tolist() == [[False, False], [True, False], [True, False]]


def test_rasterize_errors():
    with pytest.raises(GeometryError):
        rasterize(Polygons((((0, 0), (1, 1)),)), 4, 4)
    with pytest.raises(GeometryError):
        rasterize(RLE((3, 4)), 4, 4)
    with pytest.raises(GeometryError):
        rasterize(Polygons((((0, 0), (9, 0), (9, 9)),)), 4, 4)


def _rle_oracle(counts, width, height):
    grid = [[False] * width for _ in range(height)]
    pos = 0
    for k, run in enumerate(counts):
        for _ in range(run):
            if k % 2:
                grid[pos % height][pos // height] = True
            pos += 1
    return grid


@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_rle_matches_loop_oracle_and_round_trips(width, height, data):
    bits = data.draw(st.lists(st.booleans(), min_size=width * height, max_size=width * height))
    mask = BinaryMask(np.array(bits).reshape(height, width))
    counts = mask_to_rle(mask)
    assert sum(counts) == width * height
    assert rasterize(RLE(counts), width, height) == mask
    assert _rle_oracle(counts, width, height) == mask.bits.tolist()


@given(
    st.lists(
        st.tuples(st.floats(0.3, 29.7), st.floats(0.3, 19.7)), min_size=3, max_size=7
    )
)
def test_convex_polygon_matches_matplotlib(points):
    pts = np.array(points)
    centre = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - centre[1], pts[:, 0] - centre[0]))
    ring = [tuple(p) for p in pts[order]]
    mask = rasterize(Polygons((tuple(ring),)), 30, 20)
    yy, xx = np.mgrid[0:20, 0:30]
    centers = np.stack([xx.ravel() + 0.5, yy.ravel() + 0.5], axis=1)
    path = MplPath(np.array(ring + [ring[0]]), closed=True)
    # skip pixel centers within float noise of an edge
    inner = path.contains_points(centers, radius=-1e-6).reshape(20, 30)
    outer = path.contains_points(centers, radius=1e-6).reshape(20, 30)
    certain = inner == outer
    assert np.array_equal(mask.bits[certain], inner[certain])


def test_rasterize_deterministic():
    g = Polygons((((1.5, 0.2), (9.1, 3.3), (4.4, 7.9)),))
    assert rasterize(g, 10, 10) == rasterize(g, 10, 10)


# --- mask_to_bbox ----------------------------------------------------------


def test_mask_to_bbox_examples():
    one = np.zeros((10, 10), bool)
    one[3, 4] = True
    assert mask_to_bbox(BinaryMask(one)) == BBox(3, 4, 4, 5)
    assert mask_to_bbox(BinaryMask(np.ones((10, 10), bool))) == BBox(0, 0, 10, 10)
    two = np.zeros((10, 10), bool)
    two[1, 1] = two[7, 5] = True
    assert mask_to_bbox(BinaryMask(two)) == BBox(1, 1, 8, 6)
    with pytest.raises(GeometryError):
        mask_to_bbox(BinaryMask.zeros(4, 4))


@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 20), st.integers(1, 20))
def test_rect_polygon_bbox_reproduces_extent(x0, y0, w, h):
    mask = rasterize(rect(x0, y0, x0 + w, y0 + h), 60, 60)
    assert mask_to_bbox(mask) == BBox(y0, x0, y0 + h, x0 + w)


# --- iou -------------------------------------------------------------------


def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BBox(0, 5, 10, 15)) == pytest.approx(1 / 3, abs=1e-15)


def test_mask_iou_shape_mismatch():
    with pytest.raises(GeometryError):
        iou(BinaryMask.zeros(3, 3), BinaryMask.zeros(4, 3))
    with pytest.raises(TypeError):
        iou(BBox(0, 0, 1, 1), BinaryMask.zeros(3, 3))


int_boxes = st.tuples(st.integers(0, 12), st.integers(0, 12), st.integers(1, 8), st.integers(1, 8)).map(
    lambda t: BBox(t[0], t[1], t[0] + t[2], t[1] + t[3])
)


def _cells(b):
    return {(y, x) for y in range(int(b.y_min), int(b.y_max)) for x in range(int(b.x_min), int(b.x_max))}


@given(int_boxes, int_boxes)
def test_box_iou_matches_cell_enumeration(a, b):
    ca, cb = _cells(a), _cells(b)
    expected = len(ca & cb) / len(ca | cb)
    assert iou(a, b) == pytest.approx(expected, abs=1e-12)
    assert iou(a, b) == iou(b, a)
    assert iou(a, a) == 1.0


@given(int_boxes, int_boxes)
def test_mask_iou_agrees_with_box_iou_for_rectangles(a, b):
    ma = rasterize(rect(a.x_min, a.y_min, a.x_max, a.y_max), 24, 24)
    mb = rasterize(rect(b.x_min, b.y_min, b.x_max, b.y_max), 24, 24)
    assert iou(ma, mb) == pytest.approx(iou(a, b), abs=1e-12)
    assert iou(ma, ma) == 1.0
