"""Ingestion of YOLO-format detection datasets.

A dataset root holds one directory per split (``train``, ``valid``, ``test``),
each with an ``images/`` directory and a parallel ``labels/`` directory of
text files sharing the image stem. A label file carries one annotation per
line: ``class_id cx cy w h`` with the box fields normalized to [0, 1].
Images without a label file are legal negatives.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from PIL import Image, UnidentifiedImageError

from .errors import DataError
from .geometry import BBox, NormBox, norm_to_pixels

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".ppm", ".webp", ".tif", ".tiff"}
SPLIT_NAMES = ("train", "valid", "test")

LPR_CLASS_NAMES = ("plate",)
CHARACTER_CLASS_NAMES = tuple(string.digits) + tuple(string.ascii_uppercase)


class DatasetError(DataError):
    """Problem with dataset layout or an unreadable image."""


class LabelParseError(DatasetError):
    """A label line that cannot be parsed, with its origin attached."""

    def __init__(self, message: str, *, line_no: int, path: Path | None = None):
        origin = f"{path}:{line_no}" if path is not None else f"line {line_no}"
        super().__init__(f"{origin}: {message}")
        self.line_no = line_no
        self.path = path


class ManifestError(DatasetError):
    """Invalid class-map manifest."""


@dataclass(frozen=True)
class ClassMap:
    """Ordered class names; a class id is its index in the list."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise ManifestError("class map must contain at least one name")
        seen = set()
        for name in self.names:
            if not isinstance(name, str) or not name:
                raise ManifestError(f"class names must be non-empty strings, got {name!r}")
            if name in seen:
                raise ManifestError(f"duplicate class name {name!r}")
            seen.add(name)

    def __len__(self) -> int:
        return len(self.names)

    def name_for(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise ManifestError(f"class id {class_id} outside class map of size {len(self.names)}")
        return self.names[class_id]


def lpr_class_map() -> ClassMap:
    """Single-class map for the plate detector."""
    return ClassMap(LPR_CLASS_NAMES)


def character_class_map() -> ClassMap:
    """36-class map for glyph detection: digits 0-9 on ids 0-9, A-Z on ids 10-35."""
    return ClassMap(CHARACTER_CLASS_NAMES)


@dataclass(frozen=True)
class GroundTruthAnnotation:
    class_id: int
    box: NormBox

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class ImageRecord:
    """One image with its parsed annotations."""

    path: Path
    width: int
    height: int
    annotations: tuple[GroundTruthAnnotation, ...]

    @property
    def key(self) -> str:
        return self.path.stem


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    records: tuple[ImageRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


def parse_label_line(text: str, line_no: int = 1, *, path: Path | None = None) -> GroundTruthAnnotation:
    """Parse one ``class_id cx cy w h`` label line.

    Raises :class:`LabelParseError` naming the line (and file, when given) for
    a wrong token count, a non-numeric field, a non-integer or negative class
    id, or a box field outside its normalized range.
    """
    tokens = text.split()
    if len(tokens) != 5:
        raise LabelParseError(
            f"expected 5 fields 'class cx cy w h', got {len(tokens)}", line_no=line_no, path=path
        )
    cls_token, *box_tokens = tokens
    try:
        class_id = int(cls_token)
    except ValueError:
        raise LabelParseError(f"class id {cls_token!r} is not an integer", line_no=line_no, path=path) from None
    if class_id < 0:
        raise LabelParseError(f"negative class id {class_id}", line_no=line_no, path=path)
    values = []
    for name, token in zip(("cx", "cy", "w", "h"), box_tokens):
        try:
            values.append(float(token))
        except ValueError:
            raise LabelParseError(f"field {name}={token!r} is not numeric", line_no=line_no, path=path) from None
    try:
        box = NormBox(*values)
    except ValueError as exc:
        raise LabelParseError(str(exc), line_no=line_no, path=path) from None
    return GroundTruthAnnotation(class_id, box)


def format_label_line(ann: GroundTruthAnnotation) -> str:
    """Serialize an annotation back to label-file form (6 decimal places)."""
    b = ann.box
    return f"{ann.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}"


def _read_label_file(path: Path, num_classes: int) -> tuple[GroundTruthAnnotation, ...]:
    annotations = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        ann = parse_label_line(line, line_no, path=path)
        if ann.class_id >= num_classes:
            raise LabelParseError(
                f"class id {ann.class_id} outside class map of size {num_classes}",
                line_no=line_no,
                path=path,
            )
        annotations.append(ann)
    return tuple(annotations)


def _probe_image(path: Path) -> tuple[int, int]:
    try:
        with Image.open(path) as img:
            return int(img.size[0]), int(img.size[1])
    except (UnidentifiedImageError, OSError) as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc


def load_split(root: Path | str, split: str, classes: ClassMap) -> DatasetSplit:
    """Load ``<root>/<split>/images`` (+ optional labels) into a :class:`DatasetSplit`.

    Every image file becomes an entry; a missing label file yields an empty
    annotation list. Any label parse error aborts the load.
    """
    root = Path(root)
    img_dir = root / split / "images"
    lbl_dir = root / split / "labels"
    if not img_dir.is_dir():
        raise DatasetError(f"missing image directory {img_dir}")
    records = []
    for path in sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        width, height = _probe_image(path)
        label_path = lbl_dir / f"{path.stem}.txt"
        annotations: tuple[GroundTruthAnnotation, ...] = ()
        if label_path.is_file():
            annotations = _read_label_file(label_path, len(classes))
        records.append(ImageRecord(path, width, height, annotations))
    return DatasetSplit(split, tuple(records))


@dataclass(frozen=True)
class DatasetStats:
    """Summary counts over one split."""

    image_count: int
    annotation_count: int
    class_histogram: dict[int, int] = field(default_factory=dict)
    # Quantiles of normalized box width/height at 0, 0.25, 0.5, 0.75, 1.
    width_quantiles: tuple[float, ...] = ()
    height_quantiles: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "images": self.image_count,
            "annotations": self.annotation_count,
            "class_histogram": {str(k): v for k, v in sorted(self.class_histogram.items())},
            "width_quantiles": [round(q, 6) for q in self.width_quantiles],
            "height_quantiles": [round(q, 6) for q in self.height_quantiles],
        }


_QUANTILE_POINTS = (0.0, 0.25, 0.5, 0.75, 1.0)


def dataset_stats(split: DatasetSplit) -> DatasetStats:
    """Image/annotation counts, per-class histogram, and box size quantiles."""
    histogram: Counter[int] = Counter()
    widths: list[float] = []
    heights: list[float] = []
    for record in split.records:
        for ann in record.annotations:
            histogram[ann.class_id] += 1
            widths.append(ann.box.w)
            heights.append(ann.box.h)
    if widths:
        wq = tuple(float(q) for q in np.quantile(widths, _QUANTILE_POINTS))
        hq = tuple(float(q) for q in np.quantile(heights, _QUANTILE_POINTS))
    else:
        wq = hq = ()
    return DatasetStats(
        image_count=len(split.records),
        annotation_count=sum(histogram.values()),
        class_histogram=dict(histogram),
        width_quantiles=wq,
        height_quantiles=hq,
    )


def _names_from_manifest(doc: object, path: Path) -> list[str]:
    if isinstance(doc, dict):
        if "names" not in doc:
            raise ManifestError(f"{path}: manifest has no 'names' entry")
        doc = doc["names"]
    if isinstance(doc, dict):
        # Mapping form {0: name, 1: name, ...}; keys must be the contiguous ids.
        try:
            keys = sorted(int(k) for k in doc)
        except (TypeError, ValueError):
            raise ManifestError(f"{path}: mapping keys must be integer class ids") from None
        if keys != list(range(len(keys))):
            raise ManifestError(f"{path}: class ids must be contiguous from 0, got {keys}")
        doc = [doc[k] if k in doc else doc[str(k)] for k in keys]
    if not isinstance(doc, list):
        raise ManifestError(f"{path}: 'names' must be a list of class names")
    names = []
    for item in doc:
        if isinstance(item, bool) or not isinstance(item, (str, int)):
            raise ManifestError(f"{path}: class name {item!r} must be a plain string")
        names.append(str(item))
    return names


def load_class_map(manifest: Path | str, expect_count: int | None = None) -> ClassMap:
    """Read an ordered ``names:`` manifest (YAML list or id-keyed mapping).

    ``expect_count`` enforces a preset size (1 for the plate map, 36 for the
    character map).
    """
    path = Path(manifest)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ManifestError(f"{path}: not valid YAML: {exc}") from exc
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    names = _names_from_manifest(doc, path)
    class_map = ClassMap(tuple(names))
    if expect_count is not None and len(class_map) != expect_count:
        raise ManifestError(f"{path}: expected {expect_count} class names, found {len(class_map)}")
    return class_map


def annotations_in_pixels(record: ImageRecord) -> list[tuple[int, BBox]]:
    """Expand a record's normalized annotations to pixel boxes."""
    return [
        (ann.class_id, norm_to_pixels(ann.box, record.width, record.height))
        for ann in record.annotations
    ]
