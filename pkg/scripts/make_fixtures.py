#!/usr/bin/env python3
"""Generate the committed recorded-backend fixture set.

Builds synthetic images plus raw head tensors for both cascade stages, and
the reference outputs an end-to-end `plateflow read` run must reproduce. All
reference values are computed here with self-contained arithmetic (this
script deliberately imports nothing from plateflow) so the fixtures act as an
independent oracle rather than an echo of the library.

Raw values are quantized to float32 before any reference math, because that
is precisely what a .rawhead round-trip preserves; every expectation is then
derived in float64 from the quantized numbers.

Usage: python3 scripts/make_fixtures.py [--out fixtures]
"""

from __future__ import annotations

import argparse
import json
import math
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

INPUT_SIDE = 640
CONF_THRESHOLD = 0.25
IOU_THRESHOLD = 0.45
PAD_RATIO = 0.05
PLATE_ROWS = 5    # cx, cy, w, h + 1 plate class
CHAR_ROWS = 40    # cx, cy, w, h + 36 glyph classes
ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

DETECTIONS_SCHEMA = "plateflow/detections/1"
READING_SCHEMA = "plateflow/reading/1"


def f32(value: float) -> float:
    """Round-trip through IEEE float32, the .rawhead storage precision."""
    return float(np.float32(value))


def write_rawhead_file(path: Path, columns: list[list[float]], rows: int) -> None:
    """Serialize anchor columns as a .rawhead tensor (row-major float32)."""
    for col in columns:
        assert len(col) == rows, f"column of length {len(col)} in a {rows}-row head"
    grid = np.array(columns, dtype=np.float32).T if columns else np.zeros((rows, 0), np.float32)
    payload = struct.pack("<4sIII", b"RHD0", grid.shape[0], grid.shape[1], 0)
    path.write_bytes(payload + grid.astype("<f4").tobytes(order="C"))


# --- independent reference math ---------------------------------------------


def plan(src_w: int, src_h: int) -> tuple[float, float, float]:
    gain = min(INPUT_SIDE / src_w, INPUT_SIDE / src_h)
    return gain, (INPUT_SIDE - gain * src_w) / 2, (INPUT_SIDE - gain * src_h) / 2


def to_model(corners: tuple[float, float, float, float], gain: float, dx: float, dy: float):
    """Source-space corners -> model-space (cx, cy, w, h)."""
    ax1, ay1, ax2, ay2 = corners
    mx1, my1 = ax1 * gain + dx, ay1 * gain + dy
    mx2, my2 = ax2 * gain + dx, ay2 * gain + dy
    return (mx1 + mx2) / 2, (my1 + my2) / 2, mx2 - mx1, my2 - my1


def corners_from_center(cx: float, cy: float, w: float, h: float):
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def from_model(corners, gain: float, dx: float, dy: float, src_w: float, src_h: float):
    """Model-space corners -> source space, clamped to the image."""
    mx1, my1, mx2, my2 = corners

    def back(v: float, pad: float, limit: float) -> float:
        return min(max((v - pad) / gain, 0.0), limit)

    return back(mx1, dx, src_w), back(my1, dy, src_h), back(mx2, dx, src_w), back(my2, dy, src_h)


def overlap_ratio(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def greedy_keep(candidates: list[dict], class_aware: bool) -> list[dict]:
    """Reference suppression: candidates are {box, class_id, confidence} dicts."""
    pending = sorted(
        candidates,
        key=lambda c: (-c["confidence"], c["box"][0], c["box"][1], c["class_id"]),
    )
    kept: list[dict] = []
    for cand in pending:
        clash = False
        for winner in kept:
            if class_aware and winner["class_id"] != cand["class_id"]:
                continue
            if overlap_ratio(winner["box"], cand["box"]) > IOU_THRESHOLD:
                clash = True
                break
        if not clash:
            kept.append(cand)
    return kept


def assert_off_gridline(value: float, context: str) -> None:
    frac = abs(value - round(value))
    assert frac > 0.005, f"{context}: {value} sits on an integer knife-edge"


# --- scene declarations ------------------------------------------------------


@dataclass
class PlateSpec:
    corners: tuple[float, float, float, float]   # intended source-space box
    conf: float
    text: str = ""
    expect: str = "keep"       # keep | suppress | below
    glyph_dup: bool = False    # add an overlapping duplicate glyph column


@dataclass
class Scene:
    key: str
    size: tuple[int, int]
    plates: list[PlateSpec] = field(default_factory=list)
    noise_columns: int = 2


SCENES = [
    Scene("car_highway_01", (1280, 720),
          [PlateSpec((402.3, 418.7, 638.9, 489.3), 0.91, "KA07MX4")]),
    Scene("car_lot_02", (800, 600),
          [PlateSpec((213.6, 301.4, 411.2, 368.8), 0.83, "7BQD204")]),
    Scene("car_street_03", (1024, 768),
          [PlateSpec((118.4, 502.6, 332.8, 571.4), 0.92, "MH12DE1"),
           PlateSpec((598.2, 214.8, 802.6, 281.2), 0.61, "GA3FTW")]),
    Scene("car_night_04", (640, 640),
          [PlateSpec((201.4, 332.6, 438.6, 405.8), 0.88, "DL8CAF55"),
           PlateSpec((206.2, 335.1, 441.8, 409.3), 0.70, "", "suppress")]),
    Scene("car_corner_05", (500, 375),
          [PlateSpec((-6.3, 281.7, 148.9, 334.3), 0.77, "UP32X9")]),
    Scene("car_far_06", (320, 240),
          [PlateSpec((101.7, 141.3, 219.9, 180.7), 0.58, "TN10Q")]),
    Scene("car_empty_07", (960, 540), [], noise_columns=4),
    Scene("car_glyphdup_08", (1100, 660),
          [PlateSpec((310.6, 248.2, 562.4, 330.6), 0.86, "W8B2ZJ", glyph_dup=True)]),
    Scene("car_tall_09", (600, 800),
          [PlateSpec((163.8, 611.2, 422.6, 688.4), 0.81, "RJ14CV20")]),
    Scene("car_wide_10", (1920, 1080),
          [PlateSpec((811.3, 707.9, 1173.7, 818.1), 0.89, "HR26DK83")]),
    Scene("car_faint_11", (720, 480),
          [PlateSpec((240.9, 205.3, 470.1, 272.7), 0.93, "AP9TU31"),
           PlateSpec((81.2, 90.6, 175.8, 121.4), 0.19, "", "below")]),
    Scene("car_single_12", (840, 630),
          [PlateSpec((327.4, 284.6, 512.6, 349.4), 0.74, "Z")]),
]


def glyph_layout(text: str, crop_w: int, crop_h: int) -> list[dict]:
    """Place glyph boxes across the crop with deterministic jitter."""
    n = len(text)
    margin = 0.07 * crop_w
    cell = (crop_w - 2 * margin) / n
    glyphs = []
    for i, glyph in enumerate(text):
        jitter_x = ((i * 37) % 7 - 3) / 100 * cell
        jitter_y = ((i * 53) % 5 - 2) / 100 * crop_h
        cx = margin + (i + 0.5) * cell + jitter_x
        cy = 0.52 * crop_h + jitter_y
        gw = 0.56 * cell
        gh = 0.57 * crop_h
        glyphs.append({
            "glyph": glyph,
            "class_id": ALPHABET.index(glyph),
            "corners": (cx - gw / 2, cy - gh / 2, cx + gw / 2, cy + gh / 2),
            "conf": round(0.94 - 0.029 * i - 0.007 * ((i * 11) % 3), 4),
        })
    return glyphs


def noise_column(rng: random.Random, rows: int, side: int) -> list[float]:
    """An anchor column whose best score sits below the confidence threshold."""
    cx = rng.uniform(40, side - 40)
    cy = rng.uniform(40, side - 40)
    w = rng.uniform(8, 60)
    h = rng.uniform(8, 60)
    col = [cx, cy, w, h] + [0.0] * (rows - 4)
    col[4 + rng.randrange(rows - 4)] = rng.uniform(0.02, 0.21)
    return col


def draw_scene(scene: Scene, plate_refs: list[dict], out: Path) -> None:
    width, height = scene.size
    img = Image.new("RGB", (width, height), (167, 171, 178))
    draw = ImageDraw.Draw(img)
    draw.rectangle([0, int(height * 0.55), width, height], fill=(96, 99, 104))
    for ref in plate_refs:
        x1, y1, x2, y2 = (int(v) for v in ref["box"])
        draw.rectangle([x1, y1, x2, y2], fill=(226, 228, 224), outline=(30, 32, 36), width=2)
    img.save(out, format="PNG")


def build_scene(scene: Scene, dirs: dict[str, Path], rng: random.Random):
    width, height = scene.size
    gain, dx, dy = plan(width, height)

    plate_columns: list[list[float]] = []
    candidates: list[dict] = []
    spec_by_conf: dict[float, PlateSpec] = {}
    for spec in scene.plates:
        cx, cy, w, h = to_model(spec.corners, gain, dx, dy)
        qcx, qcy, qw, qh, qconf = f32(cx), f32(cy), f32(w), f32(h), f32(spec.conf)
        plate_columns.append([qcx, qcy, qw, qh, qconf])
        if qconf >= CONF_THRESHOLD:
            candidates.append({
                "box": corners_from_center(qcx, qcy, qw, qh),
                "class_id": 0,
                "confidence": qconf,
                "spec": spec,
            })
            spec_by_conf[qconf] = spec
        else:
            assert spec.expect == "below", f"{scene.key}: {spec.conf} unexpectedly below threshold"
    for _ in range(scene.noise_columns):
        plate_columns.append(noise_column(rng, PLATE_ROWS, INPUT_SIDE))
    rng.shuffle(plate_columns)
    write_rawhead_file(dirs["rawheads"] / f"{scene.key}.rawhead", plate_columns, PLATE_ROWS)

    survivors = greedy_keep(candidates, class_aware=True)
    expected_specs = [s for s in scene.plates if s.expect == "keep"]
    assert len(survivors) == len(expected_specs), (
        f"{scene.key}: suppression kept {len(survivors)}, designed {len(expected_specs)}"
    )

    detection_entries = []
    plate_refs = []
    for index, winner in enumerate(survivors):
        spec = winner["spec"]
        assert spec.expect == "keep", f"{scene.key}: survivor was designed to be suppressed"
        sx1, sy1, sx2, sy2 = from_model(winner["box"], gain, dx, dy, width, height)
        assert sx2 > sx1 and sy2 > sy1, f"{scene.key}: plate collapsed after clamping"
        detection_entries.append({
            "box": [round(v, 6) for v in (sx1, sy1, sx2, sy2)],
            "class_id": 0,
            "confidence": round(winner["confidence"], 6),
        })
        plate_refs.append({
            "box": (sx1, sy1, sx2, sy2),
            "confidence": winner["confidence"],
            "spec": spec,
            "index": index,
        })

    detection_record = {
        "schema": DETECTIONS_SCHEMA,
        "image": scene.key,
        "width": width,
        "height": height,
        "detections": detection_entries,
    }

    plate_payloads = []
    for ref in plate_refs:
        plate_payloads.append(build_crop_stage(scene, ref, dirs, rng))

    reading_record = {
        "schema": READING_SCHEMA,
        "image": scene.key,
        "plates": plate_payloads,
    }

    draw_scene(scene, plate_refs, dirs["images"] / f"{scene.key}.png")
    return detection_record, reading_record


def build_crop_stage(scene: Scene, ref: dict, dirs: dict[str, Path], rng: random.Random):
    width, height = scene.size
    px1, py1, px2, py2 = ref["box"]
    pad_w = (px2 - px1) * PAD_RATIO
    pad_h = (py2 - py1) * PAD_RATIO
    for edge, context in ((px1 - pad_w, "left"), (py1 - pad_h, "top"),
                          (px2 + pad_w, "right"), (py2 + pad_h, "bottom")):
        if 0.0 < edge < (width if context in ("left", "right") else height):
            assert_off_gridline(edge, f"{scene.key} crop {context}")
    cx1 = max(0, math.floor(px1 - pad_w))
    cy1 = max(0, math.floor(py1 - pad_h))
    cx2 = min(width, math.ceil(px2 + pad_w))
    cy2 = min(height, math.ceil(py2 + pad_h))
    crop_w, crop_h = cx2 - cx1, cy2 - cy1
    assert crop_w > 0 and crop_h > 0

    gain, dx, dy = plan(crop_w, crop_h)
    spec: PlateSpec = ref["spec"]
    glyphs = glyph_layout(spec.text, crop_w, crop_h)

    char_columns: list[list[float]] = []
    candidates: list[dict] = []
    for item in glyphs:
        cxm, cym, wm, hm = to_model(item["corners"], gain, dx, dy)
        qcx, qcy, qw, qh, qconf = f32(cxm), f32(cym), f32(wm), f32(hm), f32(item["conf"])
        column = [qcx, qcy, qw, qh] + [0.0] * 36
        column[4 + item["class_id"]] = qconf
        char_columns.append(column)
        candidates.append({
            "box": corners_from_center(qcx, qcy, qw, qh),
            "class_id": item["class_id"],
            "confidence": qconf,
            "glyph": item["glyph"],
        })
    if spec.glyph_dup and glyphs:
        # An overlapping lower-confidence read of the first glyph as a
        # different character; class-agnostic suppression must drop it.
        item = glyphs[0]
        ix1, iy1, ix2, iy2 = item["corners"]
        shifted = (ix1 + 0.8, iy1 + 0.5, ix2 + 0.8, iy2 + 0.5)
        cxm, cym, wm, hm = to_model(shifted, gain, dx, dy)
        qcx, qcy, qw, qh, qconf = f32(cxm), f32(cym), f32(wm), f32(hm), f32(item["conf"] - 0.31)
        column = [qcx, qcy, qw, qh] + [0.0] * 36
        rival_class = (item["class_id"] + 3) % 36
        column[4 + rival_class] = qconf
        char_columns.append(column)
        candidates.append({
            "box": corners_from_center(qcx, qcy, qw, qh),
            "class_id": rival_class,
            "confidence": qconf,
            "glyph": ALPHABET[rival_class],
        })
    for _ in range(2):
        char_columns.append(noise_column(rng, CHAR_ROWS, INPUT_SIDE))
    rng.shuffle(char_columns)

    key = f"{scene.key}__plate{ref['index']}"
    write_rawhead_file(dirs["rawheads"] / f"{key}.rawhead", char_columns, CHAR_ROWS)

    survivors = greedy_keep(candidates, class_aware=False)
    assert len(survivors) == len(spec.text), (
        f"{key}: {len(survivors)} glyphs survived, text needs {len(spec.text)}"
    )

    observations = []
    for winner in survivors:
        gx1, gy1, gx2, gy2 = from_model(winner["box"], gain, dx, dy, crop_w, crop_h)
        observations.append({
            "glyph": winner["glyph"],
            "box": (gx1, gy1, gx2, gy2),
            "confidence": winner["confidence"],
            "x_center": (gx1 + gx2) / 2,
        })
    observations.sort(key=lambda o: o["x_center"])
    text = "".join(o["glyph"] for o in observations)
    assert text == spec.text, f"{key}: assembled {text!r}, designed {spec.text!r}"

    return {
        "box": [round(v, 6) for v in ref["box"]],
        "confidence": round(ref["confidence"], 6),
        "characters": [
            {
                "glyph": o["glyph"],
                "box": [round(v, 6) for v in o["box"]],
                "confidence": round(o["confidence"], 6),
            }
            for o in observations
        ],
        "text": text,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures", help="fixture directory to (re)build")
    args = parser.parse_args()

    root = Path(args.out)
    dirs = {
        "images": root / "images",
        "rawheads": root / "rawheads",
        "expected": root / "expected",
    }
    for directory in dirs.values():
        directory.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20240817)
    detection_records = []
    reading_records = []
    for scene in sorted(SCENES, key=lambda s: s.key):
        det, reading = build_scene(scene, dirs, rng)
        detection_records.append(det)
        reading_records.append(reading)

    with (dirs["expected"] / "detections.jsonl").open("w", encoding="utf-8") as fh:
        for record in detection_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with (dirs["expected"] / "readings.jsonl").open("w", encoding="utf-8") as fh:
        for record in reading_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    truth_lines = []
    for record in reading_records:
        for index, plate in enumerate(record["plates"]):
            truth_lines.append({"image": record["image"], "plate": index, "text": plate["text"]})
    with (dirs["expected"] / "truth.jsonl").open("w", encoding="utf-8") as fh:
        for line in truth_lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")

    provenance = {
        "generator": "scripts/make_fixtures.py",
        "seed": 20240817,
        "input_side": INPUT_SIDE,
        "conf_threshold": CONF_THRESHOLD,
        "iou_threshold": IOU_THRESHOLD,
        "pad_ratio": PAD_RATIO,
        "images": len(SCENES),
        "plates": sum(len(r["plates"]) for r in reading_records),
    }
    (root / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")

    print(f"wrote {provenance['images']} images, {provenance['plates']} plates under {root}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
