"""Serialization: JSONL detection records and quad-format annotation text.

Records hold plain JSON numbers, so floats round-trip exactly through
``repr``; rereading a file and writing it back is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidBoxError, QuadFormatError, SchemaError
from .geometry import RotatedBox, quad_to_box
from .types import Detection

_NUMERIC_FIELDS = ("cx", "cy", "w", "h", "theta", "score")
_ALLOWED_KEYS = {"image_id", "cx", "cy", "w", "h", "theta", "class", "score",
                 "bg_score", "difficult"}


@dataclass(frozen=True)
class DetectionRow:
    """One serialized detection: which image it belongs to, and flags."""

    image_id: str
    detection: Detection
    difficult: bool = False


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def record_from_row(row: DetectionRow) -> dict:
    """Plain-JSON record for one detection; optional fields appear only when set."""
    box = row.detection.box
    record = {
        "image_id": row.image_id,
        "cx": box.cx,
        "cy": box.cy,
        "w": box.w,
        "h": box.h,
        "theta": box.theta,
        "class": row.detection.category,
        "score": row.detection.score,
    }
    if row.detection.bg_score is not None:
        record["bg_score"] = row.detection.bg_score
    if row.difficult:
        record["difficult"] = True
    return record


def row_from_record(record: dict, line_no: int = 0) -> DetectionRow:
    """Validate one parsed JSON record and build the detection it describes."""
    where = f"line {line_no}: " if line_no else ""
    if not isinstance(record, dict):
        raise SchemaError(f"{where}record must be a JSON object")
    unknown = set(record) - _ALLOWED_KEYS
    if unknown:
        raise SchemaError(f"{where}unknown field {sorted(unknown)[0]!r}")
    for key in ("image_id", "class"):
        if key not in record:
            raise SchemaError(f"{where}missing field {key!r}")
        if not isinstance(record[key], str) or not record[key]:
            raise SchemaError(f"{where}field {key!r} must be a non-empty string")
    for key in _NUMERIC_FIELDS:
        if key not in record:
            raise SchemaError(f"{where}missing field {key!r}")
        if not _is_number(record[key]) or not math.isfinite(record[key]):
            raise SchemaError(f"{where}field {key!r} must be a finite number")
    if not 0.0 <= record["score"] <= 1.0:
        raise SchemaError(f"{where}field 'score' must be in [0, 1]")
    bg_score = record.get("bg_score")
    if bg_score is not None:
        if not _is_number(bg_score) or not 0.0 <= bg_score <= 1.0:
            raise SchemaError(f"{where}field 'bg_score' must be a number in [0, 1]")
        bg_score = float(bg_score)
    difficult = record.get("difficult", False)
    if not isinstance(difficult, bool):
        raise SchemaError(f"{where}field 'difficult' must be a boolean")
    try:
        box = RotatedBox(float(record["cx"]), float(record["cy"]),
                         float(record["w"]), float(record["h"]),
                         float(record["theta"]))
    except InvalidBoxError as exc:
        raise SchemaError(f"{where}{exc}") from exc
    detection = Detection(box=box, category=record["class"],
                          score=float(record["score"]), bg_score=bg_score)
    return DetectionRow(image_id=record["image_id"], detection=detection,
                        difficult=difficult)


def write_detections(path: str | Path, rows: Iterable[DetectionRow]) -> None:
    """Write rows as JSONL, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(record_from_row(row)))
            fh.write("\n")


def read_detections(path: str | Path) -> list[DetectionRow]:
    """Read and validate a JSONL detection file; errors carry line numbers."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            rows.append(row_from_record(record, line_no))
    return rows


def group_by_image(rows: Sequence[DetectionRow]) -> dict[str, list[Detection]]:
    """Detections per image id, in first-appearance order."""
    grouped: dict[str, list[Detection]] = {}
    for row in rows:
        grouped.setdefault(row.image_id, []).append(row.detection)
    return grouped


def difficult_by_image(rows: Sequence[DetectionRow]) -> dict[str, list[bool]]:
    """Difficult flags per image id, aligned with ``group_by_image``."""
    grouped: dict[str, list[bool]] = {}
    for row in rows:
        grouped.setdefault(row.image_id, []).append(row.difficult)
    return grouped


@dataclass(frozen=True)
class DotaObject:
    """One annotation parsed from quad-format text."""

    box: RotatedBox
    category: str
    difficult: bool


@dataclass(frozen=True)
class DotaParseResult:
    """Parsed annotations plus per-line errors for the lines that failed."""

    objects: tuple[DotaObject, ...]
    errors: tuple[str, ...]


def parse_dota(text: str) -> DotaParseResult:
    """Parse quad-per-line annotation text into rotated boxes.

    Each data line holds eight corner coordinates, a category, and a
    difficult flag.  Header lines (``imagesource:``/``gsd:``) and blank
    lines are skipped.  A malformed line is reported in ``errors`` with
    its line number and does not affect the others.
    """
    objects: list[DotaObject] = []
    errors: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("imagesource:") or line.startswith("gsd:"):
            continue
        tokens = line.split()
        if len(tokens) != 10:
            errors.append(f"line {line_no}: expected 10 fields, got {len(tokens)}")
            continue
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            errors.append(f"line {line_no}: corner coordinates must be numbers")
            continue
        try:
            difficult = bool(int(tokens[9]))
        except ValueError:
            errors.append(f"line {line_no}: difficult flag must be an integer")
            continue
        quad = np.asarray(coords, dtype=np.float64).reshape(4, 2)
        try:
            box = quad_to_box(quad)
        except QuadFormatError as exc:
            errors.append(f"line {line_no}: {exc}")
            continue
        objects.append(DotaObject(box=box, category=tokens[8], difficult=difficult))
    return DotaParseResult(objects=tuple(objects), errors=tuple(errors))
