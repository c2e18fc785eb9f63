"""Total parsers for raw model output strings.

None of the parsers raise on bad input. Malformed pieces are dropped and
described in ``ParsedOutput.diagnostics``; a missing prediction then scores
as a false negative downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from .codec import (
    INSTANCE_SEPARATOR,
    LOC_BINS,
    SEG_TOKENS,
    SEG_VOCAB,
    Detection,
    SegmentationInstance,
    TokenError,
    decode_box,
    decode_mask,
)
from .core import DiagnosisLabel, GeometryError, ImageInfo

_LOC = r"<loc(\d{4})>"
_SEG = r"<seg(\d{3})>"
_DET_RE = re.compile(r"\s*((?:<loc\d{4}>){4})\s*([^<>;]*?)\s*", re.ASCII)
_SEG_RE = re.compile(r"\s*((?:<loc\d{4}>){4})((?:<seg\d{3}>){16})\s*([^<>;]*?)\s*", re.ASCII)
_LOC_FIND = re.compile(_LOC, re.ASCII)
_SEG_FIND = re.compile(_SEG, re.ASCII)

_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4", "five": "5",
    "six": "6", "seven": "7", "eight": "8", "nine": "9", "ten": "10",
}
_TRAILING = re.compile(r"[\s.,]+$")


@dataclass(frozen=True)
class ParsedOutput:
    task: str
    payload: Any
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def canonical(self) -> bool:
        return not self.diagnostics


def _as_text(raw: str | bytes) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8", errors="replace")
    return str(raw)


def _segments(text: str) -> list[str]:
    if not text.strip():
        return []
    return text.split(";")


def parse_detection(raw: str | bytes, image: ImageInfo) -> ParsedOutput:
    text = _as_text(raw)
    found: list[Detection] = []
    canon: list[str] = []
    diags: list[str] = []
    for k, seg in enumerate(_segments(text)):
        m = _DET_RE.fullmatch(seg)
        if m is None or not m.group(2):
            diags.append(f"segment {k}: malformed detection {seg.strip()[:60]!r}")
            continue
        idx = [int(v) for v in _LOC_FIND.findall(m.group(1))]
        if max(idx) >= LOC_BINS:
            diags.append(f"segment {k}: location index out of range")
            continue
        try:
            box = decode_box(idx, image)
        except (TokenError, GeometryError) as exc:
            diags.append(f"segment {k}: {exc}")
            continue
        found.append(Detection(m.group(2), box))
        canon.append(f"{m.group(1)} {m.group(2)}")
    _check_canonical(text, canon, diags)
    return ParsedOutput("detection", found, tuple(diags))


def parse_segmentation(raw: str | bytes, image: ImageInfo) -> ParsedOutput:
    text = _as_text(raw)
    found: list[SegmentationInstance] = []
    canon: list[str] = []
    diags: list[str] = []
    for k, seg in enumerate(_segments(text)):
        m = _SEG_RE.fullmatch(seg)
        if m is None or not m.group(3):
            n_seg = len(_SEG_FIND.findall(seg))
            detail = f" ({n_seg} seg tokens, need {SEG_TOKENS})" if n_seg != SEG_TOKENS else ""
            diags.append(f"segment {k}: malformed segmentation{detail}")
            continue
        loc = [int(v) for v in _LOC_FIND.findall(m.group(1))]
        codes = [int(v) for v in _SEG_FIND.findall(m.group(2))]
        if max(loc) >= LOC_BINS or max(codes) >= SEG_VOCAB:
            diags.append(f"segment {k}: token index outside vocabulary")
            continue
        try:
            box, mask = decode_mask(loc, codes, image)
        except (TokenError, GeometryError) as exc:
            diags.append(f"segment {k}: {exc}")
            continue
        if mask.count == 0:
            diags.append(f"segment {k}: empty mask")
            continue
        found.append(SegmentationInstance(m.group(3), box, mask))
        canon.append(f"{m.group(1)}{m.group(2)} {m.group(3)}")
    _check_canonical(text, canon, diags)
    return ParsedOutput("segmentation", found, tuple(diags))


def _check_canonical(text: str, canon: list[str], diags: list[str]) -> None:
    if not diags and canon and INSTANCE_SEPARATOR.join(canon) != text:
        diags.append("non-canonical formatting")


def parse_diagnosis(raw: str | bytes) -> ParsedOutput:
    text = _as_text(raw)
    try:
        label = DiagnosisLabel.parse(normalize_answer(text))
    except ValueError:
        return ParsedOutput("diagnosis", None, (f"unrecognized diagnosis {text.strip()[:60]!r}",))
    diags = () if text == label.text else ("non-canonical formatting",)
    return ParsedOutput("diagnosis", label, diags)


def parse_text(task: str, raw: str | bytes) -> ParsedOutput:
    """Report and VQA outputs are free text; only stray outer whitespace is flagged."""
    text = _as_text(raw)
    return ParsedOutput(task, text.strip(), () if text == text.strip() else ("surrounding whitespace",))


def parse_output(task: str, raw: str | bytes, image: ImageInfo | None = None) -> ParsedOutput:
    if task == "detection":
        return parse_detection(raw, image)
    if task == "segmentation":
        return parse_segmentation(raw, image)
    if task == "diagnosis":
        return parse_diagnosis(raw)
    return parse_text(task, raw)


def normalize_answer(raw: str) -> str:
    """Canonical short answer: lowercase, trimmed, number words as digits.

    Trailing periods and commas are removed as a run, so the function is
    idempotent.
    """
    text = _TRAILING.sub("", " ".join(raw.lower().split()))
    return " ".join(_NUMBER_WORDS.get(tok, tok) for tok in text.split())
