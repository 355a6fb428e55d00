"""Raw detector-head decoding and greedy non-maximum suppression.

The raw head is a ``(4 + num_classes) x num_anchors`` float matrix: rows 0-3
hold the candidate box as ``cx, cy, w, h`` in model-input pixels, the
remaining rows hold one score per class. Decoding takes the best class per
anchor column and keeps it when the score clears the confidence threshold;
NMS then greedily drops lower-confidence candidates that overlap a kept one.

This module also owns the ``.rawhead`` fixture file format used to replay
head tensors without a neural runtime:

    bytes 0-3    magic ``RHD0``
    bytes 4-7    u32 little-endian row count (4 + num_classes)
    bytes 8-11   u32 little-endian column count (num_anchors)
    bytes 12-15  u32 reserved, written as 0
    bytes 16-    rows*cols IEEE-754 float32 little-endian, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .geometry import BBox, LetterboxTransform, iou, unmap_box

RAWHEAD_MAGIC = b"RHD0"
_HEADER = struct.Struct("<4sIII")

DEFAULT_CONF_THRESHOLD = 0.25
DEFAULT_IOU_THRESHOLD = 0.45


class RawHeadFormatError(DataError):
    """Malformed ``.rawhead`` file."""


class DecodeError(DataError):
    """Raw head tensor content that cannot be decoded."""


@dataclass(frozen=True)
class RawHeadOutput:
    """Detector head tensor of shape ``(4 + num_classes, num_anchors)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise ValueError(f"raw head must be a 2-d matrix, got shape {self.data.shape}")
        rows, cols = self.data.shape
        if rows < 5:
            raise ValueError(f"raw head needs at least 5 rows (4 box + 1 class), got {rows}")
        if cols < 1:
            raise ValueError("raw head needs at least one anchor column")

    @property
    def num_classes(self) -> int:
        return self.data.shape[0] - 4

    @property
    def num_anchors(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Detection:
    """One decoded box with its class and confidence."""

    box: BBox
    class_id: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")
        if self.box.area <= 0:
            raise ValueError(f"detection box must have positive area, got {self.box!r}")


@dataclass(frozen=True)
class PostprocessConfig:
    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    class_aware: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError(f"conf_threshold {self.conf_threshold} outside [0,1]")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold {self.iou_threshold} outside [0,1]")


def write_rawhead(path: Path | str, data: np.ndarray) -> None:
    """Write a head matrix as a ``.rawhead`` file (float32, row-major)."""
    matrix = np.ascontiguousarray(data, dtype=np.float32)
    if matrix.ndim != 2:
        raise RawHeadFormatError(f"raw head must be 2-d, got shape {matrix.shape}")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RAWHEAD_MAGIC, rows, cols, 0))
        fh.write(matrix.tobytes())


def read_rawhead(path: Path | str) -> RawHeadOutput:
    """Read a ``.rawhead`` file back into a :class:`RawHeadOutput`."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise RawHeadFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, rows, cols, _reserved = _HEADER.unpack_from(blob)
    if magic != RAWHEAD_MAGIC:
        raise RawHeadFormatError(f"{path}: bad magic {magic!r}, expected {RAWHEAD_MAGIC!r}")
    expected = _HEADER.size + rows * cols * 4
    if len(blob) != expected:
        raise RawHeadFormatError(f"{path}: expected {expected} bytes for {rows}x{cols}, found {len(blob)}")
    matrix = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(rows, cols).copy()
    try:
        return RawHeadOutput(matrix)
    except ValueError as exc:
        raise RawHeadFormatError(f"{path}: {exc}") from None


def decode(raw: RawHeadOutput, conf_threshold: float = DEFAULT_CONF_THRESHOLD) -> list[Detection]:
    """Turn a raw head into candidate detections, one at most per anchor column.

    For each column the best class score is taken; a detection is emitted when
    that score reaches ``conf_threshold``. Candidates whose box has zero or
    negative area are dropped.
    """
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError(f"conf_threshold {conf_threshold} outside [0,1]")
    data = raw.data
    finite_cols = np.isfinite(data).all(axis=0)
    if not finite_cols.all():
        column = int(np.argmin(finite_cols))
        raise DecodeError(f"non-finite value in raw head column {column}")
    data = data.astype(np.float64, copy=False)
    scores = data[4:]
    best_class = scores.argmax(axis=0)
    confidence = scores[best_class, np.arange(scores.shape[1])]
    detections: list[Detection] = []
    for column in np.flatnonzero(confidence >= conf_threshold):
        conf = float(confidence[column])
        if conf > 1.0 or conf < 0.0:
            raise DecodeError(f"class score {conf} outside [0,1] in raw head column {column}")
        cx, cy, w, h = (float(v) for v in data[:4, column])
        if w <= 0 or h <= 0:
            continue
        box = BBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
        detections.append(Detection(box, int(best_class[column]), conf))
    return detections


def _nms_order_key(d: Detection):
    # Confidence descending; ties by smaller x1, then y1, then class id.
    return (-d.confidence, d.box.x1, d.box.y1, d.class_id)


def nms(
    dets: Sequence[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    class_aware: bool = True,
) -> list[Detection]:
    """Greedy suppression: keep a detection iff its IoU with every kept one
    (of the same class when ``class_aware``) stays at or below the threshold.

    Output is sorted by confidence descending with deterministic tie handling.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside [0,1]")
    kept: list[Detection] = []
    for candidate in sorted(dets, key=_nms_order_key):
        suppressed = False
        for keeper in kept:
            if class_aware and keeper.class_id != candidate.class_id:
                continue
            if iou(keeper.box, candidate.box) > iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(candidate)
    return kept


def postprocess_image(
    raw: RawHeadOutput,
    cfg: PostprocessConfig,
    transform: LetterboxTransform,
) -> list[Detection]:
    """Decode, suppress, and map the survivors back into source-image space.

    Boxes that collapse to zero area after un-letterboxing (fully inside the
    padding) are dropped.
    """
    kept = nms(decode(raw, cfg.conf_threshold), cfg.iou_threshold, cfg.class_aware)
    results = []
    for det in kept:
        box = unmap_box(det.box, transform)
        if box.area <= 0:
            continue
        results.append(Detection(box, det.class_id, det.confidence))
    return results
