"""Dataclass configuration for the two-stage pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import ClassMap, character_class_map
from .postprocess import DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD

DEFAULT_PAD_RATIO = 0.05


@dataclass(frozen=True)
class StageConfig:
    """Thresholds for one detection stage."""

    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    iou_threshold: float = DEFAULT_IOU_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError(f"conf_threshold {self.conf_threshold} outside [0,1]")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold {self.iou_threshold} outside [0,1]")


@dataclass(frozen=True)
class PipelineConfig:
    """End-to-end cascade settings.

    The plate stage suppresses per class (trivially, with one class); the
    character stage sends suppression across classes so one physical glyph
    never yields two competing characters. ``row_clustering`` turns on the
    optional multi-row ordering pre-pass; the default is a pure x-axis sort.
    """

    plate: StageConfig = field(default_factory=StageConfig)
    char: StageConfig = field(default_factory=StageConfig)
    pad_ratio: float = DEFAULT_PAD_RATIO
    row_clustering: bool = False
    char_class_map: ClassMap = field(default_factory=character_class_map)

    def __post_init__(self) -> None:
        if self.pad_ratio < 0:
            raise ValueError(f"pad_ratio must be non-negative, got {self.pad_ratio}")
