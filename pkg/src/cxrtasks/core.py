"""Domain types for images, geometry, masks and the annotation manifest.

Coordinates follow one convention everywhere: origin at the top-left corner,
``y`` (rows) before ``x`` (columns), and max edges exclusive.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np


class GeometryError(ValueError):
    """Raised for geometry that cannot be rasterized or measured."""


class ManifestError(ValueError):
    """Raised when a manifest document cannot be parsed at all."""


class DiagnosisLabel(str, enum.Enum):
    ACTIVE_TB = "active_tb"
    INACTIVE_TB = "inactive_tb"
    NORMAL = "normal"
    SICK_BUT_NO_TB = "sick_but_no_tb"

    @property
    def text(self) -> str:
        """Fixed human-readable form used as the diagnosis target string."""
        return _DIAGNOSIS_TEXT[self]

    @classmethod
    def parse(cls, value: str) -> "DiagnosisLabel":
        """Accept either the manifest code (``active_tb``) or the text form."""
        key = " ".join(value.strip().lower().replace("_", " ").split())
        for label in cls:
            if key in (label.value.replace("_", " "), label.text.lower()):
                return label
        raise ValueError(f"unknown diagnosis label: {value!r}")


_DIAGNOSIS_TEXT = {
    DiagnosisLabel.ACTIVE_TB: "active TB",
    DiagnosisLabel.INACTIVE_TB: "inactive TB",
    DiagnosisLabel.NORMAL: "normal",
    DiagnosisLabel.SICK_BUT_NO_TB: "sick but no TB",
}


class Quality(str, enum.Enum):
    GOOD = "good"
    AVERAGE = "average"
    POOR = "poor"


@dataclass(frozen=True)
class ImageInfo:
    """Per-image metadata. Pixel data is referenced by id and never loaded."""

    image_id: str
    width: int
    height: int
    diagnosis: DiagnosisLabel | None = None
    quality: Quality = Quality.GOOD
    channels: int = 3

    @classmethod
    def canvas(cls, width: int, height: int) -> "ImageInfo":
        """Anonymous image of a given size, for codec work without a manifest."""
        return cls(image_id="", width=int(width), height=int(height))


@dataclass(frozen=True)
class BBox:
    y_min: float
    x_min: float
    y_max: float
    x_max: float

    def __post_init__(self) -> None:
        if not (self.y_min < self.y_max and self.x_min < self.x_max):
            raise GeometryError(f"box has non-positive area: {self}")

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def area(self) -> float:
        return self.height * self.width

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.y_min + self.y_max) / 2, (self.x_min + self.x_max) / 2

    def within(self, image: ImageInfo) -> bool:
        return (
            0 <= self.y_min
            and self.y_max <= image.height
            and 0 <= self.x_min
            and self.x_max <= image.width
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.y_min, self.x_min, self.y_max, self.x_max)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Row-major boolean grid of shape ``(height, width)``; read-only."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2:
            raise GeometryError(f"mask must be 2-D, got shape {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.bits.shape, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, set={self.count})"


@dataclass(frozen=True)
class Polygons:
    """One or more closed rings of ``(x, y)`` vertices; rasterized as a union."""

    rings: tuple[tuple[tuple[float, float], ...], ...]


@dataclass(frozen=True)
class RLE:
    """COCO-style uncompressed run lengths, column-major, starting with zeros."""

    counts: tuple[int, ...]


Geometry = Union[Polygons, RLE, BinaryMask]


@dataclass(frozen=True)
class PathologyAnnotation:
    image_id: str
    pathology: str
    geometry: Geometry


@dataclass(frozen=True)
class Manifest:
    images: tuple[ImageInfo, ...]
    annotations: tuple[PathologyAnnotation, ...]
    vocabulary: tuple[str, ...]

    def image(self, image_id: str) -> ImageInfo:
        for info in self.images:
            if info.image_id == image_id:
                return info
        raise KeyError(image_id)

    def annotations_for(self, image_id: str) -> list[PathologyAnnotation]:
        return [a for a in self.annotations if a.image_id == image_id]

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Manifest":
        try:
            images = tuple(_image_from_dict(d) for d in doc["images"])
            annotations = tuple(_annotation_from_dict(d) for d in doc.get("annotations", []))
            vocabulary = tuple(str(v) for v in doc.get("vocabulary", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from exc
        return cls(images, annotations, vocabulary)

    def to_dict(self) -> dict[str, Any]:
        return {
            "images": [
                {
                    "id": i.image_id,
                    "width": i.width,
                    "height": i.height,
                    "channels": i.channels,
                    "quality": i.quality.value,
                    "diagnosis": i.diagnosis.value if i.diagnosis else None,
                }
                for i in self.images
            ],
            "annotations": [_annotation_to_dict(a) for a in self.annotations],
            "vocabulary": list(self.vocabulary),
        }


def _image_from_dict(d: dict[str, Any]) -> ImageInfo:
    return ImageInfo(
        image_id=str(d["id"]),
        width=int(d["width"]),
        height=int(d["height"]),
        diagnosis=DiagnosisLabel.parse(d["diagnosis"]),
        quality=Quality(d.get("quality", "good")),
        channels=int(d.get("channels", 3)),
    )


def _annotation_from_dict(d: dict[str, Any]) -> PathologyAnnotation:
    if "polygon" in d:
        raw = d["polygon"]
        # A flat list of [x, y] pairs is one ring; a list of such lists is several.
        if raw and raw[0] and isinstance(raw[0][0], (list, tuple)):
            rings = raw
        else:
            rings = [raw]
        geometry: Geometry = Polygons(
            tuple(tuple((float(x), float(y)) for x, y in ring) for ring in rings)
        )
    elif "rle" in d:
        geometry = RLE(tuple(int(c) for c in d["rle"]))
    else:
        raise ValueError(f"annotation for {d.get('image_id')!r} has neither polygon nor rle")
    return PathologyAnnotation(str(d["image_id"]), str(d["pathology"]), geometry)


def _annotation_to_dict(a: PathologyAnnotation) -> dict[str, Any]:
    out: dict[str, Any] = {"image_id": a.image_id, "pathology": a.pathology}
    g = a.geometry
    if isinstance(g, Polygons):
        rings = [[list(p) for p in ring] for ring in g.rings]
        out["polygon"] = rings[0] if len(rings) == 1 else rings
    elif isinstance(g, RLE):
        out["rle"] = list(g.counts)
    else:
        out["rle"] = list(mask_to_rle(g))
    return out


def load_manifest(path: str | Path) -> Manifest:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    return Manifest.from_dict(doc)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1) + "\n")


# --------------------------------------------------------------------------
# rasterization


def rasterize(geometry: Geometry, width: int, height: int) -> BinaryMask:
    """Rasterize polygons (even-odd at pixel centers) or column-major RLE."""
    if isinstance(geometry, BinaryMask):
        if (geometry.width, geometry.height) != (width, height):
            raise GeometryError(
                f"mask is {geometry.width}x{geometry.height}, expected {width}x{height}"
            )
        return geometry
    if isinstance(geometry, RLE):
        return _decode_rle(geometry.counts, width, height)
    if isinstance(geometry, Polygons):
        if not geometry.rings:
            raise GeometryError("polygon geometry has no rings")
        bits = np.zeros((height, width), dtype=bool)
        for ring in geometry.rings:
            bits |= _fill_ring(ring, width, height)
        return BinaryMask(bits)
    raise TypeError(f"unsupported geometry type: {type(geometry).__name__}")


def _fill_ring(ring: Sequence[tuple[float, float]], width: int, height: int) -> np.ndarray:
    if len(ring) < 3:
        raise GeometryError(f"polygon needs at least 3 vertices, got {len(ring)}")
    pts = np.asarray(ring, dtype=float)
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > width) or np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > height):
        raise GeometryError("polygon vertex outside image bounds")
    py = (np.arange(height) + 0.5)[:, None]
    px = (np.arange(width) + 0.5)[None, :]
    inside = np.zeros((height, width), dtype=bool)
    x1, y1 = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        if ay == by:
            continue
        crosses = (ay > py) != (by > py)
        x_at = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < x_at)
    return inside


def _decode_rle(counts: Sequence[int], width: int, height: int) -> BinaryMask:
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise GeometryError("negative RLE run")
    if sum(counts) != width * height:
        raise GeometryError(f"RLE runs sum to {sum(counts)}, expected {width * height}")
    values = np.arange(len(counts)) % 2 == 1
    flat = np.repeat(values, counts)
    return BinaryMask(flat.reshape((height, width), order="F"))


def mask_to_rle(mask: BinaryMask) -> tuple[int, ...]:
    """Inverse of RLE decoding: column-major runs, first run counts zeros."""
    flat = mask.bits.reshape(-1, order="F")
    if flat.size == 0:
        return (0,)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return tuple(int(r) for r in runs)


def mask_to_bbox(mask: BinaryMask) -> BBox:
    """Tightest box around set bits; max edges are exclusive."""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if rows.size == 0:
        raise GeometryError("cannot take the bounding box of an empty mask")
    cols = np.flatnonzero(mask.bits.any(axis=0))
    return BBox(float(rows[0]), float(cols[0]), float(rows[-1] + 1), float(cols[-1] + 1))


def iou(a: BBox | BinaryMask, b: BBox | BinaryMask) -> float:
    if isinstance(a, BBox) and isinstance(b, BBox):
        dy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
        dx = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
        inter = max(dy, 0.0) * max(dx, 0.0)
        union = a.area + b.area - inter
        return inter / union
    if isinstance(a, BinaryMask) and isinstance(b, BinaryMask):
        if a.bits.shape != b.bits.shape:
            raise GeometryError(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
        union = int(np.count_nonzero(a.bits | b.bits))
        if union == 0:
            return 0.0
        return int(np.count_nonzero(a.bits & b.bits)) / union
    raise TypeError("iou needs two boxes or two masks")


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    image_id: str
    kind: str
    message: str = field(default="")

    def __str__(self) -> str:
        return f"[{self.kind}] {self.image_id}: {self.message}"


def validate_manifest(manifest: Manifest) -> list[Violation]:
    """Report every invariant breach; an empty list means the manifest is valid."""
    out: list[Violation] = []
    seen: dict[str, ImageInfo] = {}
    for info in manifest.images:
        if info.image_id in seen:
            out.append(Violation(info.image_id, "duplicate id", "image id appears more than once"))
            continue
        seen[info.image_id] = info
        if info.width < 1 or info.height < 1:
            out.append(Violation(info.image_id, "bad dimensions", f"{info.width}x{info.height}"))
        if info.diagnosis is None:
            out.append(Violation(info.image_id, "missing diagnosis", ""))

    vocab = set(manifest.vocabulary)
    if len(vocab) != len(manifest.vocabulary):
        out.append(Violation("", "duplicate vocabulary", "vocabulary has repeated labels"))
    for idx, ann in enumerate(manifest.annotations):
        info = seen.get(ann.image_id)
        if info is None:
            out.append(Violation(ann.image_id, "dangling annotation", f"annotation #{idx} references unknown image"))
            continue
        if ann.pathology not in vocab:
            out.append(Violation(ann.image_id, "unknown pathology", f"annotation #{idx}: {ann.pathology!r}"))
        if info.width < 1 or info.height < 1:
            continue
        try:
            mask = rasterize(ann.geometry, info.width, info.height)
        except GeometryError as exc:
            out.append(Violation(ann.image_id, "bad geometry", f"annotation #{idx}: {exc}"))
            continue
        if mask.count == 0:
            out.append(Violation(ann.image_id, "empty mask", f"annotation #{idx} rasterizes to no pixels"))
    return out


def annotation_mask(ann: PathologyAnnotation, image: ImageInfo) -> BinaryMask:
    """Rasterize an annotation, rejecting empty masks."""
    mask = rasterize(ann.geometry, image.width, image.height)
    if mask.count == 0:
        raise GeometryError(f"annotation on {image.image_id!r} has an empty mask")
    return mask


def iter_image_annotations(manifest: Manifest) -> Iterable[tuple[ImageInfo, list[PathologyAnnotation]]]:
    by_image: dict[str, list[PathologyAnnotation]] = {}
    for ann in manifest.annotations:
        by_image.setdefault(ann.image_id, []).append(ann)
    for info in manifest.images:
        yield info, by_image.get(info.image_id, [])
