"""The end-to-end reading cascade.

An image goes through plate detection, each detected plate is cropped (with a
small configurable margin), the crop goes through character detection, and
the surviving glyphs are ordered by their horizontal centers to assemble the
plate string. Character boxes live in plate-crop pixel space; the crop origin
is recorded so they can be placed back into the source image.

Crop inference keys derive from the parent image key as ``<key>__plate<i>``,
with ``i`` the plate's index in confidence-descending order. Recorded fixture
sets follow the same convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import median

import numpy as np

from .backend import DetectorBackend, preprocess
from .config import PipelineConfig
from .errors import BackendError, PlateflowError
from .geometry import BBox
from .postprocess import Detection, PostprocessConfig, postprocess_image

READING_SCHEMA = "plateflow/reading/1"


class PipelineError(PlateflowError):
    """Cascade failure, carrying which image/plate was being processed."""


class CropError(PipelineError):
    """Plate box that cannot produce a usable crop."""


@dataclass(frozen=True)
class CharacterObservation:
    """One detected glyph inside a plate crop."""

    glyph: str
    box: BBox
    confidence: float

    @property
    def x_center(self) -> float:
        return self.box.x_center

    @property
    def y_center(self) -> float:
        return self.box.y_center


@dataclass(frozen=True)
class PlateReading:
    """A plate detection with its ordered characters and assembled text.

    ``row_major`` marks readings produced with row clustering on: characters
    are then ordered top row first and x-sorted within each row, so the
    global non-decreasing x_center invariant is only enforced per row.
    """

    plate: Detection
    characters: tuple[CharacterObservation, ...]
    text: str
    row_major: bool = False

    def __post_init__(self) -> None:
        if len(self.text) != len(self.characters):
            raise ValueError(f"text {self.text!r} does not cover {len(self.characters)} characters")
        if not self.row_major:
            centers = [c.x_center for c in self.characters]
            if any(a > b for a, b in zip(centers, centers[1:])):
                raise ValueError("characters must be ordered by non-decreasing x_center")


def crop_key(image_key: str, plate_index: int) -> str:
    return f"{image_key}__plate{plate_index}"


def detect_plates(
    image: np.ndarray, key: str, backend: DetectorBackend, cfg: PipelineConfig
) -> list[Detection]:
    """Run the plate stage; detections come back in source-image pixel space."""
    tensor, transform = preprocess(image, backend.descriptor.input_side)
    raw = backend.infer(key, tensor)
    stage = PostprocessConfig(cfg.plate.conf_threshold, cfg.plate.iou_threshold, class_aware=True)
    return postprocess_image(raw, stage, transform)


def crop_plate(
    image: np.ndarray, plate: BBox, pad_ratio: float
) -> tuple[np.ndarray, tuple[int, int]]:
    """Cut the plate region out of the image, expanded by ``pad_ratio`` per side.

    Returns the crop and its top-left offset in source pixels. The expansion
    is proportional to the plate's own width/height and the result is clamped
    to the image bounds.
    """
    if plate.area <= 0:
        raise CropError(f"plate box has no area: {plate!r}")
    img_h, img_w = image.shape[:2]
    pad_w = plate.width * pad_ratio
    pad_h = plate.height * pad_ratio
    x1 = max(0, math.floor(plate.x1 - pad_w))
    y1 = max(0, math.floor(plate.y1 - pad_h))
    x2 = min(img_w, math.ceil(plate.x2 + pad_w))
    y2 = min(img_h, math.ceil(plate.y2 + pad_h))
    if x2 <= x1 or y2 <= y1:
        raise CropError(f"plate box {plate!r} lies outside the {img_w}x{img_h} image")
    return image[y1:y2, x1:x2], (x1, y1)


def recognize_characters(
    crop: np.ndarray, key: str, backend: DetectorBackend, cfg: PipelineConfig
) -> list[CharacterObservation]:
    """Run the character stage on a plate crop.

    The crop is letterboxed (not stretched) to the model input so glyph aspect
    ratios survive; suppression is class-agnostic. Observation boxes are in
    crop pixel space.
    """
    tensor, transform = preprocess(crop, backend.descriptor.input_side)
    raw = backend.infer(key, tensor)
    stage = PostprocessConfig(cfg.char.conf_threshold, cfg.char.iou_threshold, class_aware=False)
    detections = postprocess_image(raw, stage, transform)
    class_map = cfg.char_class_map
    observations = []
    for det in detections:
        if det.class_id >= len(class_map):
            raise PipelineError(
                f"character class id {det.class_id} outside class map of size {len(class_map)}"
            )
        observations.append(
            CharacterObservation(class_map.name_for(det.class_id), det.box, det.confidence)
        )
    return observations


def _x_order_key(obs: CharacterObservation):
    # x ascending; ties by smaller y, then higher confidence, then glyph order.
    return (obs.x_center, obs.y_center, -obs.confidence, obs.glyph)


def _cluster_rows(observations: list[CharacterObservation]) -> list[list[CharacterObservation]]:
    median_height = median(o.box.height for o in observations)
    by_y = sorted(observations, key=lambda o: (o.y_center, o.x_center, -o.confidence, o.glyph))
    spread = by_y[-1].y_center - by_y[0].y_center
    if spread <= 0.5 * median_height:
        return [observations]
    rows: list[list[CharacterObservation]] = [[by_y[0]]]
    for obs in by_y[1:]:
        if obs.y_center - rows[-1][-1].y_center > 0.5 * median_height:
            rows.append([obs])
        else:
            rows[-1].append(obs)
    return rows


def order_characters(
    observations: list[CharacterObservation], row_clustering: bool = False
) -> list[CharacterObservation]:
    """Order glyphs by ascending horizontal center (optionally row by row)."""
    if not observations:
        return []
    if row_clustering and len(observations) > 1:
        rows = _cluster_rows(observations)
        ordered: list[CharacterObservation] = []
        for row in rows:
            ordered.extend(sorted(row, key=_x_order_key))
        return ordered
    return sorted(observations, key=_x_order_key)


def sequence_characters(
    observations: list[CharacterObservation], row_clustering: bool = False
) -> str:
    """Assemble the plate string from observations ordered by x_center."""
    return "".join(o.glyph for o in order_characters(observations, row_clustering))


def read_plate(
    image: np.ndarray,
    key: str,
    plate_backend: DetectorBackend,
    char_backend: DetectorBackend,
    cfg: PipelineConfig,
) -> list[PlateReading]:
    """Full cascade for one image; readings ordered by plate confidence descending."""
    plates = detect_plates(image, key, plate_backend, cfg)
    readings = []
    for index, plate in enumerate(plates):
        try:
            crop, _origin = crop_plate(image, plate.box, cfg.pad_ratio)
            observations = recognize_characters(crop, crop_key(key, index), char_backend, cfg)
        except BackendError as exc:
            raise BackendError(f"image '{key}', plate {index}: {exc}") from exc
        except PlateflowError as exc:
            raise PipelineError(f"image '{key}', plate {index}: {exc}") from exc
        ordered = order_characters(observations, cfg.row_clustering)
        text = "".join(o.glyph for o in ordered)
        readings.append(PlateReading(plate, tuple(ordered), text, row_major=cfg.row_clustering))
    return readings


def reading_record(key: str, readings: list[PlateReading]) -> dict:
    """Serializable record for one image's readings (schema plateflow/reading/1)."""
    return {
        "schema": READING_SCHEMA,
        "image": key,
        "plates": [
            {
                "box": [round(v, 6) for v in (r.plate.box.x1, r.plate.box.y1, r.plate.box.x2, r.plate.box.y2)],
                "confidence": round(r.plate.confidence, 6),
                "characters": [
                    {
                        "glyph": c.glyph,
                        "box": [round(v, 6) for v in (c.box.x1, c.box.y1, c.box.x2, c.box.y2)],
                        "confidence": round(c.confidence, 6),
                    }
                    for c in r.characters
                ],
                "text": r.text,
            }
            for r in readings
        ],
    }
