"""Location and segmentation token codecs.

Boxes become four ``<locNNNN>`` tokens in ``(y_min, x_min, y_max, x_max)``
order, each coordinate quantized into 1000 bins of its image dimension.
Masks additionally become sixteen ``<segNNN>`` tokens: the mask is cropped
to its box, resampled to 64x64, cut into a 4x4 grid of 16x16 patches, and
each patch is replaced by its nearest entry in a fixed 128-pattern codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .core import BBox, BinaryMask, GeometryError, ImageInfo

LOC_BINS = 1000
SEG_VOCAB = 128
GRID = 64
PATCH = 16
PATCHES_PER_SIDE = GRID // PATCH
SEG_TOKENS = PATCHES_PER_SIDE**2

_N_ANGLES = 14
_OFFSETS = tuple(1.6 * k for k in range(-4, 5))


class TokenError(ValueError):
    """Raised for token sequences that do not decode to valid geometry."""


@dataclass(frozen=True)
class LocToken:
    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index < LOC_BINS:
            raise TokenError(f"location index out of range: {self.index}")

    def __str__(self) -> str:
        return f"<loc{self.index:04d}>"


@dataclass(frozen=True)
class SegToken:
    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index < SEG_VOCAB:
            raise TokenError(f"segmentation index out of range: {self.index}")

    def __str__(self) -> str:
        return f"<seg{self.index:03d}>"


def render_tokens(tokens: Sequence[LocToken | SegToken]) -> str:
    return "".join(str(t) for t in tokens)


# --------------------------------------------------------------------------
# boxes


def _quantize(coord: float, dim: int) -> int:
    # exact floor on the shortest decimal form, so 0.7 px on a 10 px axis is bin 70
    idx = math.floor(Fraction(repr(float(coord))) * LOC_BINS / dim)
    return min(max(idx, 0), LOC_BINS - 1)


def _dequantize(index: int, dim: int) -> float:
    return (index + 0.5) / LOC_BINS * dim


def encode_box(box: BBox, image: ImageInfo) -> tuple[LocToken, LocToken, LocToken, LocToken]:
    h, w = image.height, image.width
    return (
        LocToken(_quantize(box.y_min, h)),
        LocToken(_quantize(box.x_min, w)),
        LocToken(_quantize(box.y_max, h)),
        LocToken(_quantize(box.x_max, w)),
    )


def decode_box(tokens: Sequence[LocToken | int], image: ImageInfo) -> BBox:
    if len(tokens) != 4:
        raise TokenError(f"a box needs 4 location tokens, got {len(tokens)}")
    y0, x0, y1, x1 = (t.index if isinstance(t, LocToken) else LocToken(int(t)).index for t in tokens)
    if y1 <= y0 or x1 <= x0:
        raise TokenError(f"degenerate box: indices {(y0, x0, y1, x1)}")
    return BBox(
        _dequantize(y0, image.height),
        _dequantize(x0, image.width),
        _dequantize(y1, image.height),
        _dequantize(x1, image.width),
    )


# --------------------------------------------------------------------------
# codebook


@lru_cache(maxsize=1)
def codebook() -> np.ndarray:
    """The 128 patch patterns as a read-only ``(128, 16, 16)`` bool array.

    Entry 0 is all-zero, entry 1 all-one. Entries 2..127 are half-planes
    ``n . p < d`` over pixel centers ``p`` measured from the patch center,
    with normals at 14 evenly spaced angles and 9 offsets ``d`` that never
    coincide with a pixel-center coordinate.
    """
    centers = np.arange(PATCH) + 0.5 - PATCH / 2
    py, px = np.meshgrid(centers, centers, indexing="ij")
    entries = [np.zeros((PATCH, PATCH), bool), np.ones((PATCH, PATCH), bool)]
    for a in range(_N_ANGLES):
        theta = 2 * math.pi * a / _N_ANGLES
        proj = math.cos(theta) * px + math.sin(theta) * py
        for d in _OFFSETS:
            entries.append(proj < d)
    book = np.stack(entries)
    assert book.shape[0] == SEG_VOCAB
    book.setflags(write=False)
    return book


def nearest_codeword(patch: np.ndarray) -> int:
    """Index of the codebook entry with least Hamming distance; ties go low."""
    flat = codebook().reshape(SEG_VOCAB, -1)
    dist = np.count_nonzero(flat != patch.reshape(1, -1), axis=1)
    return int(np.argmin(dist))


def _nearest_codewords(grid: np.ndarray) -> list[int]:
    flat = codebook().reshape(SEG_VOCAB, -1)
    out = []
    for r in range(PATCHES_PER_SIDE):
        for c in range(PATCHES_PER_SIDE):
            patch = grid[r * PATCH : (r + 1) * PATCH, c * PATCH : (c + 1) * PATCH].reshape(1, -1)
            out.append(int(np.argmin(np.count_nonzero(flat != patch, axis=1))))
    return out


# --------------------------------------------------------------------------
# masks


def pixel_span(lo: float, hi: float, dim: int) -> tuple[int, int]:
    """Pixels whose centers fall in ``[lo, hi)``, widened to at least one pixel."""
    start = min(max(math.ceil(lo - 0.5), 0), dim - 1)
    stop = min(max(math.ceil(hi - 0.5), 0), dim)
    return start, max(stop, start + 1)


def _resample_index(n_out: int, n_in: int) -> np.ndarray:
    # nearest neighbour by sample centers
    return np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(int)


def encode_mask(
    mask: BinaryMask, box: BBox, image: ImageInfo
) -> tuple[tuple[LocToken, ...], tuple[SegToken, ...]]:
    """Box tokens followed by 16 patch codes, in row-major patch order.

    Re-encoding a decoded mask reproduces the tokens exactly whenever the
    decoded box covers at least 64 pixels per side: the two nearest-neighbour
    resamplings then compose to the identity on the 64x64 grid. Below that a
    patch has fewer than 16 pixels per side and cannot hold every codeword.
    """
    if (mask.width, mask.height) != (image.width, image.height):
        raise GeometryError("mask size does not match the image")
    r0, r1 = pixel_span(box.y_min, box.y_max, image.height)
    c0, c1 = pixel_span(box.x_min, box.x_max, image.width)
    crop = mask.bits[r0:r1, c0:c1]
    if not crop.any():
        raise GeometryError("mask has no set pixels inside its box")
    grid = crop[np.ix_(_resample_index(GRID, r1 - r0), _resample_index(GRID, c1 - c0))]
    seg = tuple(SegToken(i) for i in _nearest_codewords(grid))
    return encode_box(box, image), seg


def codes_to_grid(codes: Sequence[int]) -> np.ndarray:
    if len(codes) != SEG_TOKENS:
        raise TokenError(f"a mask needs {SEG_TOKENS} segmentation tokens, got {len(codes)}")
    book = codebook()
    grid = np.zeros((GRID, GRID), dtype=bool)
    for k, code in enumerate(codes):
        r, c = divmod(k, PATCHES_PER_SIDE)
        grid[r * PATCH : (r + 1) * PATCH, c * PATCH : (c + 1) * PATCH] = book[SegToken(int(code)).index]
    return grid


def decode_mask(
    loc: Sequence[LocToken | int], seg: Sequence[SegToken | int], image: ImageInfo
) -> tuple[BBox, BinaryMask]:
    """Decode box and full-canvas mask; the mask may be empty."""
    box = decode_box(loc, image)
    grid = codes_to_grid([s.index if isinstance(s, SegToken) else int(s) for s in seg])
    r0, r1 = pixel_span(box.y_min, box.y_max, image.height)
    c0, c1 = pixel_span(box.x_min, box.x_max, image.width)
    canvas = np.zeros((image.height, image.width), dtype=bool)
    canvas[r0:r1, c0:c1] = grid[np.ix_(_resample_index(r1 - r0, GRID), _resample_index(c1 - c0, GRID))]
    return box, BinaryMask(canvas)


# --------------------------------------------------------------------------
# instances and suffix rendering


@dataclass(frozen=True)
class Detection:
    label: str
    box: BBox


@dataclass(frozen=True)
class SegmentationInstance:
    label: str
    box: BBox
    mask: BinaryMask


Instance = Union[Detection, SegmentationInstance]

INSTANCE_SEPARATOR = " ; "


def render_instance(instance: Instance, image: ImageInfo) -> str:
    if isinstance(instance, SegmentationInstance):
        loc, seg = encode_mask(instance.mask, instance.box, image)
        return f"{render_tokens(loc)}{render_tokens(seg)} {instance.label}"
    return f"{render_tokens(encode_box(instance.box, image))} {instance.label}"


def render_suffix(task: str, instances: Sequence[Instance], image: ImageInfo) -> str:
    """Canonical target string: ``tokens label`` groups joined by ``" ; "``."""
    if not instances:
        raise ValueError("cannot render an empty instance list")
    want = {"detection": Detection, "segmentation": SegmentationInstance}.get(task)
    if want is None:
        raise ValueError(f"render_suffix supports detection or segmentation, not {task!r}")
    for inst in instances:
        if not isinstance(inst, want):
            raise TypeError(f"{task} suffix got a {type(inst).__name__}")
        if not inst.label or inst.label != inst.label.strip() or ";" in inst.label or "<" in inst.label:
            raise ValueError(f"label cannot be rendered unambiguously: {inst.label!r}")
    return INSTANCE_SEPARATOR.join(render_instance(i, image) for i in instances)
