"""Synthetic manifests for tests, demos and the acceptance run.

Annotations are axis-aligned rectangles that never overlap within an image,
so every codec round trip of them is exact on images no larger than 1000 px.
"""

from __future__ import annotations

import random

import numpy as np

from .core import (
    RLE,
    BinaryMask,
    DiagnosisLabel,
    ImageInfo,
    Manifest,
    PathologyAnnotation,
    Polygons,
    Quality,
    mask_to_rle,
)

DEFAULT_VOCABULARY = (
    "consolidation",
    "cavitation",
    "pleural effusion",
    "fibrosis",
    "nodule",
    "lymphadenopathy",
    "miliary pattern",
    "calcification",
)

# class frequencies of the curated 1,149-image dataset
DIAGNOSIS_FREQUENCIES = {
    DiagnosisLabel.ACTIVE_TB: 715,
    DiagnosisLabel.INACTIVE_TB: 69,
    DiagnosisLabel.NORMAL: 332,
    DiagnosisLabel.SICK_BUT_NO_TB: 33,
}


def _overlaps(a, b, gap: int) -> bool:
    return not (
        a[2] + gap <= b[0] or b[2] + gap <= a[0] or a[3] + gap <= b[1] or b[3] + gap <= a[1]
    )


def _place_boxes(rng: random.Random, width: int, height: int, n: int, min_frac: float, max_frac: float):
    boxes = []
    for _ in range(200 * n):
        if len(boxes) == n:
            break
        h = rng.randint(max(2, int(min_frac * height) + 1), max(3, int(max_frac * height)))
        w = rng.randint(max(2, int(min_frac * width) + 1), max(3, int(max_frac * width)))
        y0 = rng.randint(0, height - h)
        x0 = rng.randint(0, width - w)
        cand = (y0, x0, y0 + h, x0 + w)
        if all(not _overlaps(cand, b, gap=2) for b in boxes):
            boxes.append(cand)
    return boxes


def make_manifest(
    n_images: int,
    seed: int = 0,
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY,
    size_range: tuple[int, int] = (400, 1000),
    max_annotations: int = 3,
    min_side_frac: float = 0.05,
    max_side_frac: float = 0.3,
    rle_every: int = 3,
) -> Manifest:
    """Random manifest; ``rle_every``-th annotation uses RLE, the rest polygons."""
    rng = random.Random(seed)
    labels = list(DIAGNOSIS_FREQUENCIES)
    freqs = list(DIAGNOSIS_FREQUENCIES.values())
    images, annotations = [], []
    ann_counter = 0
    for k in range(n_images):
        width = rng.randint(*size_range)
        height = rng.randint(*size_range)
        diagnosis = rng.choices(labels, weights=freqs)[0]
        quality = rng.choice([Quality.GOOD, Quality.AVERAGE])
        info = ImageInfo(f"img{k:05d}", width, height, diagnosis, quality)
        images.append(info)
        if diagnosis is DiagnosisLabel.NORMAL:
            continue
        n_ann = rng.randint(1, max_annotations)
        for y0, x0, y1, x1 in _place_boxes(rng, width, height, n_ann, min_side_frac, max_side_frac):
            pathology = rng.choice(vocabulary)
            ann_counter += 1
            if rle_every and ann_counter % rle_every == 0:
                bits = np.zeros((height, width), dtype=bool)
                bits[y0:y1, x0:x1] = True
                geometry = RLE(mask_to_rle(BinaryMask(bits)))
            else:
                geometry = Polygons((((x0, y0), (x1, y0), (x1, y1), (x0, y1)),))
            annotations.append(PathologyAnnotation(info.image_id, pathology, geometry))
    return Manifest(tuple(images), tuple(annotations), tuple(vocabulary))
