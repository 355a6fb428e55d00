"""Axis-aligned box algebra, IoU, and the letterbox coordinate mapping.

Everything here is pure value arithmetic: boxes are continuous pixel
coordinates with a top-left origin (x right, y down), areas are computed as
``(x2 - x1) * (y2 - y1)`` with no +1 pixel convention, and the letterbox
transform is the affine map between an original image and the square model
input it is resized-and-padded into.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Gray value used to fill letterbox padding, as (R, G, B).
PAD_COLOR = (114, 114, 114)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box ``(x1, y1, x2, y2)`` in pixels; corners may coincide."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate in {self!r}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"inverted box {self!r}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def x_center(self) -> float:
        return (self.x1 + self.x2) / 2

    @property
    def y_center(self) -> float:
        return (self.y1 + self.y2) / 2

    def clamped(self, img_w: float, img_h: float) -> "BBox":
        """Clamp all corners into ``[0, img_w] x [0, img_h]``."""
        return BBox(
            min(max(self.x1, 0.0), img_w),
            min(max(self.y1, 0.0), img_h),
            min(max(self.x2, 0.0), img_w),
            min(max(self.y2, 0.0), img_h),
        )


@dataclass(frozen=True)
class NormBox:
    """Center/size box as fractions of image width and height."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.cx, self.cy, self.w, self.h)):
            raise ValueError(f"non-finite normalized box {self!r}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"center outside [0,1] in {self!r}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError(f"size outside (0,1] in {self!r}")


@dataclass(frozen=True)
class LetterboxTransform:
    """Affine map from source-image pixels into the padded model input.

    ``model = source * scale + pad``, applied per axis, where ``scale``
    preserves aspect ratio and the padding centers the scaled content.
    """

    scale: float
    pad_x: float
    pad_y: float
    src_w: float
    src_h: float
    dst_w: float
    dst_h: float


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint or degenerate."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def norm_to_pixels(n: NormBox, img_w: float, img_h: float) -> BBox:
    """Expand a normalized center/size box to pixel corners, clamped to the image."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {img_w}x{img_h}")
    x1 = (n.cx - n.w / 2) * img_w
    y1 = (n.cy - n.h / 2) * img_h
    x2 = (n.cx + n.w / 2) * img_w
    y2 = (n.cy + n.h / 2) * img_h
    return BBox(x1, y1, x2, y2).clamped(img_w, img_h)


def pixels_to_norm(b: BBox, img_w: float, img_h: float) -> NormBox:
    """Inverse of :func:`norm_to_pixels` for boxes inside the image."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {img_w}x{img_h}")
    return NormBox(
        b.x_center / img_w,
        b.y_center / img_h,
        b.width / img_w,
        b.height / img_h,
    )


def letterbox_plan(src_w: float, src_h: float, dst: int) -> LetterboxTransform:
    """Plan the aspect-preserving resize of ``src_w x src_h`` into ``dst x dst``."""
    if src_w <= 0 or src_h <= 0 or dst <= 0:
        raise ValueError(f"dimensions must be positive, got {src_w}x{src_h} -> {dst}")
    scale = min(dst / src_w, dst / src_h)
    pad_x = (dst - scale * src_w) / 2
    pad_y = (dst - scale * src_h) / 2
    return LetterboxTransform(scale, pad_x, pad_y, src_w, src_h, dst, dst)


def map_box(b: BBox, t: LetterboxTransform) -> BBox:
    """Map a source-space box into model-input space (no clamping)."""
    return BBox(
        b.x1 * t.scale + t.pad_x,
        b.y1 * t.scale + t.pad_y,
        b.x2 * t.scale + t.pad_x,
        b.y2 * t.scale + t.pad_y,
    )


def unmap_box(b: BBox, t: LetterboxTransform) -> BBox:
    """Map a model-space box back into source space, clamped to source bounds."""
    return BBox(
        (b.x1 - t.pad_x) / t.scale,
        (b.y1 - t.pad_y) / t.scale,
        (b.x2 - t.pad_x) / t.scale,
        (b.y2 - t.pad_y) / t.scale,
    ).clamped(t.src_w, t.src_h)
