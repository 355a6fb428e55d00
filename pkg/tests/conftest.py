"""Shared fixtures plus the acceptance-summary reporting hook."""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from plateflow import BBox, Detection

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"

# Populated by the acceptance module; printed in the terminal summary so each
# criterion reports one visible pass/fail line even under captured output.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        verdict = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"[{verdict}] {name}{suffix}")


@pytest.fixture
def fixtures_dir() -> Path:
    if not FIXTURES_DIR.is_dir():
        pytest.fail("committed fixture set missing; run scripts/make_fixtures.py")
    return FIXTURES_DIR


@pytest.fixture
def tiny_dataset(tmp_path: Path) -> Path:
    """Two-image single-class dataset with known annotations."""
    root = tmp_path / "dataset"
    images = root / "test" / "images"
    labels = root / "test" / "labels"
    images.mkdir(parents=True)
    labels.mkdir(parents=True)
    Image.new("RGB", (200, 100), (120, 120, 120)).save(images / "a.png")
    Image.new("RGB", (400, 300), (120, 120, 120)).save(images / "b.png")
    (labels / "a.txt").write_text("0 0.5 0.5 0.4 0.6\n")
    (labels / "b.txt").write_text("0 0.25 0.25 0.2 0.3\n0 0.75 0.75 0.2 0.3\n")
    return root


def random_box(rng: random.Random, span: float = 100.0, min_side: float = 1.0) -> BBox:
    x1 = rng.uniform(0, span - min_side)
    y1 = rng.uniform(0, span - min_side)
    return BBox(x1, y1, x1 + rng.uniform(min_side, span - x1), y1 + rng.uniform(min_side, span - y1))


def random_detections(rng: random.Random, count: int, num_classes: int) -> list[Detection]:
    # Confidences drawn without replacement so ordering is unambiguous and
    # oracle comparisons cannot hinge on tie-break conventions.
    confs = rng.sample(range(1, 100000), count)
    return [
        Detection(random_box(rng), rng.randrange(num_classes), conf / 100000.0)
        for conf in confs
    ]


def random_ground_truth(rng: random.Random, count: int, num_classes: int) -> list[tuple[int, BBox]]:
    return [(rng.randrange(num_classes), random_box(rng)) for _ in range(count)]


def as_plain_pred(det: Detection) -> tuple[tuple[float, float, float, float], int, float]:
    return ((det.box.x1, det.box.y1, det.box.x2, det.box.y2), det.class_id, det.confidence)


def as_plain_gt(gt: tuple[int, BBox]) -> tuple[int, tuple[float, float, float, float]]:
    class_id, box = gt
    return (class_id, (box.x1, box.y1, box.x2, box.y2))


def write_head(path: Path, columns: list[list[float]], rows: int) -> None:
    """Write a raw head tensor for recorded-backend tests."""
    import struct

    grid = np.array(columns, dtype=np.float32).T if columns else np.zeros((rows, 0), np.float32)
    assert grid.shape[0] == rows
    header = struct.pack("<4sIII", b"RHD0", grid.shape[0], grid.shape[1], 0)
    path.write_bytes(header + grid.astype("<f4").tobytes(order="C"))
