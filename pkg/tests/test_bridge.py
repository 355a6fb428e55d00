"""Cross-implementation bridge: raw head tensors dumped by the export tool
under its reference runtime must be reproduced by this package's decode+NMS.

The fixture set is freshly generated, not committed. Build it with:

    cd frontend && npm install --ignore-scripts && npm run build && npm run bridge

The whole module skips when the artifacts are absent so the primary suite
stays self-contained.
"""

import json
from pathlib import Path

import pytest

from plateflow.postprocess import decode, nms, read_rawhead

from conftest import REPO_ROOT, record_criterion

BRIDGE_DIR = REPO_ROOT / "frontend" / "bridge_fixtures"

pytestmark = pytest.mark.skipif(
    not (BRIDGE_DIR / "provenance.json").exists(),
    reason="bridge fixtures not generated (see frontend/README.md)",
)

TOLERANCE = 1e-4
MIN_IMAGES = 20

STAGES = {"plate": "plate_detections.jsonl", "character": "char_detections.jsonl"}


@pytest.fixture(scope="module")
def provenance():
    return json.loads((BRIDGE_DIR / "provenance.json").read_text())


def load_expected(name: str) -> list[dict]:
    lines = (BRIDGE_DIR / "expected" / name).read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert all(r["schema"] == "plateflow/bridge/1" for r in records)
    return records


def test_provenance_declares_thresholds(provenance):
    assert provenance["thresholds"] == {"conf": 0.25, "iou": 0.45}
    assert provenance["images"] >= MIN_IMAGES
    assert set(provenance["stages"]) == set(STAGES)


def test_tensor_files_round_trip_bit_exactly(provenance):
    for stage in STAGES:
        info = provenance["stages"][stage]
        files = sorted((BRIDGE_DIR / info["tensors"]).glob("*.rawhead"))
        assert len(files) >= MIN_IMAGES
        for path in files[:5]:
            raw = read_rawhead(path)
            assert raw.data.shape == (info["rows"], 400)
            payload = Path(path).read_bytes()[16:]
            assert raw.data.astype("<f4").tobytes() == payload


def test_reference_detections_reproduced(provenance):
    conf = provenance["thresholds"]["conf"]
    iou_thr = provenance["thresholds"]["iou"]
    images = 0
    compared = 0
    max_gap = 0.0
    passed = False
    try:
        for stage, expected_name in STAGES.items():
            info = provenance["stages"][stage]
            for record in load_expected(expected_name):
                raw = read_rawhead(BRIDGE_DIR / info["tensors"] / f"{record['image']}.rawhead")
                kept = nms(decode(raw, conf), iou_thr, class_aware=info["class_aware"])
                expected = record["detections"]
                assert len(kept) == len(expected), (
                    f"{stage}/{record['image']}: {len(kept)} detections, reference has {len(expected)}"
                )
                for det, ref in zip(kept, expected):
                    assert det.class_id == ref["class_id"], f"{stage}/{record['image']}"
                    got = (det.box.x1, det.box.y1, det.box.x2, det.box.y2, det.confidence)
                    want = (*ref["box"], ref["confidence"])
                    for g, w in zip(got, want):
                        gap = abs(g - w)
                        max_gap = max(max_gap, gap)
                        assert gap <= TOLERANCE, (
                            f"{stage}/{record['image']}: |{g} - {w}| = {gap} > {TOLERANCE}"
                        )
                    compared += 1
                if stage == "plate":
                    images += 1
        assert images >= MIN_IMAGES, f"only {images} images in the bridge set"
        passed = True
    finally:
        record_criterion(
            f"cross-implementation bridge ({MIN_IMAGES}+ images, {TOLERANCE} tolerance)",
            passed,
            f"{images} images x 2 stages, {compared} detections, max gap {max_gap:.2e}",
        )


def test_blank_scene_has_empty_reference(provenance):
    for stage, expected_name in STAGES.items():
        records = {r["image"]: r["detections"] for r in load_expected(expected_name)}
        blanks = [k for k, dets in records.items() if not dets]
        assert blanks, f"{stage}: expected at least one blank scene"
        for key in blanks:
            info = provenance["stages"][stage]
            raw = read_rawhead(BRIDGE_DIR / info["tensors"] / f"{key}.rawhead")
            assert nms(decode(raw, 0.25), 0.45, class_aware=info["class_aware"]) == []
