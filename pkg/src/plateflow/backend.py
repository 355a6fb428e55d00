"""Inference backends behind one small contract.

A backend turns a preprocessed ``1x3x640x640`` tensor (plus the image's
identity key) into a raw head tensor. The recorded backend replays committed
``.rawhead`` fixtures by key, so the whole pipeline and test suite run with no
neural runtime installed; the ONNX runtime backend executes a real model and
is an optional feature (the ``onnxruntime`` import happens lazily).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import BackendError, DataError
from .geometry import PAD_COLOR, LetterboxTransform, letterbox_plan
from .postprocess import RawHeadOutput, read_rawhead

MODEL_INPUT_SIDE = 640

ROLE_PLATE = "plate"
ROLE_CHARACTER = "character"
_ROLE_CLASSES = {ROLE_PLATE: 1, ROLE_CHARACTER: 36}


class FixtureLookupError(BackendError):
    """No recorded tensor for a requested key."""


class ModelLoadError(BackendError):
    """The model file cannot be loaded or the runtime is unavailable."""


class ModelShapeError(BackendError):
    """Model or fixture tensor shape disagrees with the descriptor."""


@dataclass(frozen=True)
class ModelDescriptor:
    """What a backend is expected to be: its role, class count, input side."""

    role: str
    num_classes: int
    input_side: int = MODEL_INPUT_SIDE
    note: str = ""

    def __post_init__(self) -> None:
        if self.role not in _ROLE_CLASSES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {sorted(_ROLE_CLASSES)}")
        expected = _ROLE_CLASSES[self.role]
        if self.num_classes != expected:
            raise ValueError(f"{self.role} role requires {expected} classes, got {self.num_classes}")
        if self.input_side <= 0:
            raise ValueError(f"input side must be positive, got {self.input_side}")

    @property
    def head_rows(self) -> int:
        return 4 + self.num_classes


def plate_descriptor(note: str = "") -> ModelDescriptor:
    return ModelDescriptor(ROLE_PLATE, 1, note=note)


def character_descriptor(note: str = "") -> ModelDescriptor:
    return ModelDescriptor(ROLE_CHARACTER, 36, note=note)


@runtime_checkable
class DetectorBackend(Protocol):
    """Behavioral contract: deterministic key+image -> raw head tensor."""

    descriptor: ModelDescriptor

    def infer(self, key: str, image: np.ndarray) -> RawHeadOutput: ...


class RecordedBackend:
    """Replays ``<fixture_dir>/<key>.rawhead`` tensors; ignores pixel content."""

    def __init__(self, fixture_dir: Path | str, descriptor: ModelDescriptor):
        self.fixture_dir = Path(fixture_dir)
        self.descriptor = descriptor
        if not self.fixture_dir.is_dir():
            raise BackendError(f"fixture directory {self.fixture_dir} does not exist")

    def infer(self, key: str, image: np.ndarray) -> RawHeadOutput:
        path = self.fixture_dir / f"{key}.rawhead"
        if not path.is_file():
            raise FixtureLookupError(f"no recorded tensor for key '{key}' under {self.fixture_dir}")
        try:
            raw = read_rawhead(path)
        except DataError as exc:
            raise BackendError(f"fixture for key '{key}' is malformed: {exc}") from exc
        if raw.data.shape[0] != self.descriptor.head_rows:
            raise ModelShapeError(
                f"fixture '{key}' has {raw.data.shape[0]} rows, "
                f"descriptor expects {self.descriptor.head_rows}"
            )
        return raw


def recorded_backend(fixture_dir: Path | str, descriptor: ModelDescriptor) -> RecordedBackend:
    return RecordedBackend(fixture_dir, descriptor)


def _dim_matches(declared, expected: int) -> bool:
    # Symbolic/dynamic dims come back as strings or None; accept those.
    return not isinstance(declared, int) or declared == expected


class OnnxRuntimeBackend:
    """Executes an ONNX model with one image input and one raw-head output."""

    def __init__(self, model_file: Path | str, descriptor: ModelDescriptor):
        try:
            import onnxruntime  # noqa: PLC0415
        except ImportError as exc:
            raise ModelLoadError(
                "onnxruntime is not installed; install the 'runtime' extra to run models"
            ) from exc
        self.descriptor = descriptor
        try:
            self._session = onnxruntime.InferenceSession(
                str(model_file), providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {model_file}: {exc}") from exc
        inputs = self._session.get_inputs()
        outputs = self._session.get_outputs()
        if len(inputs) != 1 or len(outputs) != 1:
            raise ModelShapeError(
                f"model must have one input and one output, found {len(inputs)}/{len(outputs)}"
            )
        side = descriptor.input_side
        in_shape = list(inputs[0].shape)
        if len(in_shape) != 4 or not all(
            _dim_matches(d, e) for d, e in zip(in_shape, (1, 3, side, side))
        ):
            raise ModelShapeError(f"model input shape {in_shape} is not 1x3x{side}x{side}")
        out_shape = list(outputs[0].shape)
        rows_axis = out_shape[-2] if len(out_shape) >= 2 else None
        if len(out_shape) not in (2, 3) or not _dim_matches(rows_axis, descriptor.head_rows):
            raise ModelShapeError(
                f"model output shape {out_shape} does not provide {descriptor.head_rows} head rows"
            )
        self._input_name = inputs[0].name

    def infer(self, key: str, image: np.ndarray) -> RawHeadOutput:
        del key  # runtime inference depends only on pixels
        (result,) = self._session.run(None, {self._input_name: image.astype(np.float32)})
        matrix = np.asarray(result)
        if matrix.ndim == 3:
            matrix = matrix[0]
        if matrix.ndim != 2 or matrix.shape[0] != self.descriptor.head_rows:
            raise ModelShapeError(
                f"model produced shape {matrix.shape}, expected ({self.descriptor.head_rows}, anchors)"
            )
        return RawHeadOutput(matrix.astype(np.float32))


def runtime_backend(model_file: Path | str, descriptor: ModelDescriptor) -> OnnxRuntimeBackend:
    return OnnxRuntimeBackend(model_file, descriptor)


def load_image(path: Path | str) -> np.ndarray:
    """Decode an image file to an RGB ``(h, w, 3)`` uint8 array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc


def letterbox_image(image: np.ndarray, dst: int = MODEL_INPUT_SIDE) -> tuple[np.ndarray, LetterboxTransform]:
    """Resize with preserved aspect ratio onto a mid-gray ``dst x dst`` canvas."""
    _check_raster(image)
    h, w = image.shape[:2]
    plan = letterbox_plan(w, h, dst)
    new_w = max(1, int(round(w * plan.scale)))
    new_h = max(1, int(round(h * plan.scale)))
    if (new_w, new_h) != (w, h):
        resized = np.asarray(
            Image.fromarray(image).resize((new_w, new_h), Image.Resampling.BILINEAR)
        )
    else:
        resized = image
    canvas = np.full((dst, dst, 3), PAD_COLOR[0], dtype=np.uint8)
    left = int(round(plan.pad_x))
    top = int(round(plan.pad_y))
    canvas[top : top + new_h, left : left + new_w] = resized
    return canvas, plan


def preprocess(image: np.ndarray, input_side: int = MODEL_INPUT_SIDE) -> tuple[np.ndarray, LetterboxTransform]:
    """Letterbox an RGB uint8 raster and scale it to a ``1x3xSxS`` float tensor in [0,1]."""
    canvas, plan = letterbox_image(image, input_side)
    tensor = canvas.astype(np.float32) / 255.0
    return tensor.transpose(2, 0, 1)[np.newaxis, ...], plan


def _check_raster(image: np.ndarray) -> None:
    if not isinstance(image, np.ndarray) or image.ndim != 3 or image.shape[2] != 3:
        raise DataError(f"expected an RGB (h, w, 3) array, got shape {getattr(image, 'shape', None)}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise DataError(f"image has empty dimensions {image.shape}")
    if image.dtype != np.uint8:
        raise DataError(f"expected uint8 pixels, got {image.dtype}")
