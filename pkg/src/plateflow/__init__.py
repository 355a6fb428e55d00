"""plateflow: two-stage license plate reading and detection evaluation."""

from .backend import (
    DetectorBackend,
    ModelDescriptor,
    character_descriptor,
    load_image,
    plate_descriptor,
    preprocess,
    recorded_backend,
    runtime_backend,
)
from .config import PipelineConfig, StageConfig
from .dataset import (
    ClassMap,
    DatasetSplit,
    GroundTruthAnnotation,
    character_class_map,
    dataset_stats,
    load_class_map,
    load_split,
    lpr_class_map,
    parse_label_line,
)
from .errors import BackendError, ConfigError, DataError, PlateflowError
from .geometry import (
    BBox,
    LetterboxTransform,
    NormBox,
    iou,
    letterbox_plan,
    map_box,
    norm_to_pixels,
    pixels_to_norm,
    unmap_box,
)
from .metrics import (
    EvalConfig,
    EvalReport,
    LossSample,
    MatchResult,
    average_precision,
    bbox_loss,
    cls_loss,
    map_suite,
    match,
    sequence_accuracy,
)
from .pipeline import (
    CharacterObservation,
    PlateReading,
    crop_plate,
    detect_plates,
    read_plate,
    recognize_characters,
    sequence_characters,
)
from .postprocess import Detection, PostprocessConfig, RawHeadOutput, decode, nms, postprocess_image

__version__ = "0.1.0"
