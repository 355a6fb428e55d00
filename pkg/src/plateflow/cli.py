"""Command-line surface for batch runs.

Subcommands: ``detect`` (plate stage only), ``read`` (full cascade),
``eval`` (detections vs. a dataset split), ``stats`` (dataset summary), and
``seq-eval`` (exact-match sequence accuracy).

Configuration precedence is CLI flag > config file (``--config``, flat
``key = value`` lines) > built-in default. Exit codes: 0 success, 2
configuration error, 3 data error, 4 backend error. Output files are written
to a temporary sibling and renamed on success, so a failed run never leaves a
partial file behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backend import (
    character_descriptor,
    load_image,
    plate_descriptor,
    recorded_backend,
    runtime_backend,
)
from .config import PipelineConfig, StageConfig
from .dataset import (
    ClassMap,
    annotations_in_pixels,
    character_class_map,
    dataset_stats,
    load_class_map,
    load_split,
    lpr_class_map,
)
from .errors import BackendError, ConfigError, DataError, PlateflowError
from .geometry import BBox
from .metrics import EvalConfig, map_suite, sequence_accuracy
from .pipeline import READING_SCHEMA, detect_plates, reading_record, read_plate
from .postprocess import Detection

DETECTIONS_SCHEMA = "plateflow/detections/1"
FIXTURES_ENV_VAR = "PLATEFLOW_FIXTURES"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4

_DEFAULTS = {
    "backend": "recorded",
    "fixtures": None,
    "plate_model": None,
    "char_model": None,
    "conf": 0.25,
    "nms_iou": 0.45,
    "pad": 0.05,
    "rows": False,
    "workers": 1,
    "format": "json",
}


@dataclass(frozen=True)
class RunConfig:
    backend: str = "recorded"
    fixtures: str | None = None
    plate_model: str | None = None
    char_model: str | None = None
    conf: float = 0.25
    nms_iou: float = 0.45
    pad: float = 0.05
    rows: bool = False
    workers: int = 1
    format: str = "json"

    def __post_init__(self) -> None:
        if self.backend not in ("recorded", "runtime"):
            raise ConfigError(f"--backend must be 'recorded' or 'runtime', got {self.backend!r}")
        if not 0.0 <= self.conf <= 1.0:
            raise ConfigError(f"--conf must be within [0,1], got {self.conf}")
        if not 0.0 <= self.nms_iou <= 1.0:
            raise ConfigError(f"--nms-iou must be within [0,1], got {self.nms_iou}")
        if self.pad < 0:
            raise ConfigError(f"--pad must be non-negative, got {self.pad}")
        if self.workers < 1:
            raise ConfigError(f"--workers must be at least 1, got {self.workers}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"--format must be 'json' or 'csv', got {self.format!r}")

    def pipeline_config(self) -> PipelineConfig:
        stage = StageConfig(self.conf, self.nms_iou)
        return PipelineConfig(plate=stage, char=stage, pad_ratio=self.pad, row_clustering=self.rows)


def parse_config_file(path: Path) -> dict:
    """Read a flat ``key = value`` config file ('#' starts a comment)."""
    values: dict[str, object] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _coerce_config_value(key, value.strip(), path, line_no)
    return values


def _coerce_config_value(key: str, value: str, path: Path, line_no: int):
    default = _DEFAULTS[key]
    if isinstance(default, bool):
        lowered = value.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{path}:{line_no}: {key} expects a boolean, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: {key} expects an integer, got {value!r}") from None
    if isinstance(default, float):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: {key} expects a number, got {value!r}") from None
    return value


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge CLI flags over config-file values over defaults."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(parse_config_file(Path(args.config)))
    for name in _DEFAULTS:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            merged[name] = cli_value
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_fixtures(cfg: RunConfig) -> Path:
    candidate = cfg.fixtures or os.environ.get(FIXTURES_ENV_VAR)
    if not candidate:
        raise ConfigError(
            f"--fixtures is required for the recorded backend (or set {FIXTURES_ENV_VAR})"
        )
    return Path(candidate)


def _make_backends(cfg: RunConfig, need_character: bool):
    if cfg.backend == "recorded":
        fixtures = _resolve_fixtures(cfg)
        plate = recorded_backend(fixtures, plate_descriptor())
        char = recorded_backend(fixtures, character_descriptor()) if need_character else None
        return plate, char
    if not cfg.plate_model:
        raise ConfigError("--plate-model is required for the runtime backend")
    plate = runtime_backend(cfg.plate_model, plate_descriptor())
    char = None
    if need_character:
        if not cfg.char_model:
            raise ConfigError("--char-model is required for the runtime backend")
        char = runtime_backend(cfg.char_model, character_descriptor())
    return plate, char


def _list_images(directory: Path) -> list[Path]:
    from .dataset import IMAGE_SUFFIXES

    if not directory.is_dir():
        raise DataError(f"image directory {directory} does not exist")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def _jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)


def _parallel_map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _say(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


# --- subcommands -----------------------------------------------------------


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    plate_backend, _ = _make_backends(cfg, need_character=False)
    pipeline_cfg = cfg.pipeline_config()
    images = _list_images(Path(args.images))

    def process(path: Path) -> dict:
        image = load_image(path)
        detections = detect_plates(image, path.stem, plate_backend, pipeline_cfg)
        return {
            "schema": DETECTIONS_SCHEMA,
            "image": path.stem,
            "width": image.shape[1],
            "height": image.shape[0],
            "detections": [
                {
                    "box": [round(v, 6) for v in (d.box.x1, d.box.y1, d.box.x2, d.box.y2)],
                    "class_id": d.class_id,
                    "confidence": round(d.confidence, 6),
                }
                for d in detections
            ],
        }

    records = _parallel_map(process, images, cfg.workers)
    out = Path(args.out)
    _write_atomic(out, _jsonl(records))
    _say(args, f"wrote {len(records)} detection records to {out}")
    return EXIT_OK


def cmd_read(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    plate_backend, char_backend = _make_backends(cfg, need_character=True)
    pipeline_cfg = cfg.pipeline_config()
    images = _list_images(Path(args.images))

    def process(path: Path) -> dict:
        image = load_image(path)
        readings = read_plate(image, path.stem, plate_backend, char_backend, pipeline_cfg)
        return reading_record(path.stem, readings)

    records = _parallel_map(process, images, cfg.workers)
    out = Path(args.out)
    _write_atomic(out, _jsonl(records))
    _say(args, f"wrote {len(records)} reading records to {out}")
    return EXIT_OK


def _load_jsonl(path: Path, expected_schema: str) -> list[dict]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise DataError(f"{path}:{line_no}: expected a JSON object")
        schema = record.get("schema")
        if schema != expected_schema:
            raise ConfigError(
                f"{path}:{line_no}: unsupported schema {schema!r}, expected {expected_schema!r}"
            )
        records.append(record)
    return records


def _detections_from_record(record: dict, path: Path) -> list[Detection]:
    detections = []
    try:
        for entry in record["detections"]:
            x1, y1, x2, y2 = entry["box"]
            detections.append(
                Detection(BBox(x1, y1, x2, y2), int(entry["class_id"]), float(entry["confidence"]))
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed detection record for {record.get('image')!r}: {exc}") from exc
    return detections


def _class_map_for(args: argparse.Namespace) -> ClassMap:
    if getattr(args, "classes", None):
        return load_class_map(Path(args.classes))
    preset = getattr(args, "preset", "lpr")
    return lpr_class_map() if preset == "lpr" else character_class_map()


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    class_map = _class_map_for(args)
    records = _load_jsonl(Path(args.pred), DETECTIONS_SCHEMA)
    preds_by_key = {}
    for record in records:
        key = record.get("image")
        if key in preds_by_key:
            raise DataError(f"{args.pred}: duplicate predictions for image {key!r}")
        preds_by_key[key] = _detections_from_record(record, Path(args.pred))

    split = load_split(Path(args.dataset), args.split, class_map)
    known_keys = {record.key for record in split.records}
    unknown = sorted(set(preds_by_key) - known_keys)
    if unknown:
        raise DataError(f"{args.pred}: predictions for images not in the dataset split: {unknown[:5]}")

    preds_per_image = []
    gts_per_image = []
    for record in split.records:
        preds_per_image.append(preds_by_key.get(record.key, []))
        gts_per_image.append(annotations_in_pixels(record))

    report = map_suite(
        preds_per_image,
        gts_per_image,
        num_classes=len(class_map),
        config=EvalConfig(fixed_confidence=cfg.conf),
        class_names=class_map.names,
    )

    if not getattr(args, "quiet", False):
        _print_report_table(report)
        if args.sweep_conf:
            _print_sweep(args, preds_per_image, gts_per_image, class_map)

    if args.out:
        out = Path(args.out)
        if cfg.format == "csv":
            import io

            buffer = io.StringIO()
            report.write_csv(buffer)
            _write_atomic(out, buffer.getvalue())
        else:
            _write_atomic(out, json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n")
        _say(args, f"wrote report to {out}")
    return EXIT_OK


def _fmt(value: float | None) -> str:
    return "   n/a" if value is None else f"{value:.4f}"


def _print_report_table(report) -> None:
    print(f"{'Precision':>10} {'Recall':>10} {'mAP50':>10} {'mAP50-95':>10}")
    print(f"{_fmt(report.precision):>10} {_fmt(report.recall):>10} {_fmt(report.map50):>10} {_fmt(report.map50_95):>10}")
    if report.no_ground_truth:
        print("note: no ground truth in this split; detection metrics are absent")


def _print_sweep(args, preds_per_image, gts_per_image, class_map) -> None:
    cutoffs = [float(tok) for tok in str(args.sweep_conf).split(",") if tok.strip()]
    print(f"{'conf':>6} {'Precision':>10} {'Recall':>10}")
    for cutoff in cutoffs:
        swept = map_suite(
            preds_per_image,
            gts_per_image,
            num_classes=len(class_map),
            config=EvalConfig(fixed_confidence=cutoff),
        )
        print(f"{cutoff:>6.2f} {_fmt(swept.precision_fixed):>10} {_fmt(swept.recall_fixed):>10}")


def cmd_stats(args: argparse.Namespace) -> int:
    class_map = _class_map_for(args)
    split = load_split(Path(args.dataset), args.split, class_map)
    stats = dataset_stats(split)
    _say(args, f"split '{args.split}': {stats.image_count} images, {stats.annotation_count} annotations")
    if stats.class_histogram and not getattr(args, "quiet", False):
        for class_id, count in sorted(stats.class_histogram.items()):
            print(f"  class {class_id} ({class_map.name_for(class_id)}): {count}")
    if args.out:
        _write_atomic(Path(args.out), json.dumps(stats.to_json(), sort_keys=True, indent=2) + "\n")
        _say(args, f"wrote stats to {args.out}")
    return EXIT_OK


def _truth_mapping(path: Path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            image = record["image"]
            text_value = record["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{line_no}: expected {{'image', 'text'}} records: {exc}") from exc
        plate_index = int(record.get("plate", 0))
        plate_id = f"{image}#{plate_index}"
        if plate_id in mapping:
            raise DataError(f"{path}:{line_no}: duplicate truth entry for {plate_id}")
        mapping[plate_id] = str(text_value)
    return mapping


def cmd_seq_eval(args: argparse.Namespace) -> int:
    readings = _load_jsonl(Path(args.readings), READING_SCHEMA)
    predicted: dict[str, str] = {}
    for record in readings:
        for index, plate in enumerate(record.get("plates", [])):
            predicted[f"{record['image']}#{index}"] = str(plate.get("text", ""))
    truth = _truth_mapping(Path(args.truth))
    result = sequence_accuracy(predicted, truth)
    if result.accuracy is None:
        _say(args, "no truth plates; sequence accuracy undefined")
    else:
        _say(args, f"sequence accuracy: {result.accuracy:.6f} ({result.matched}/{result.total_truth})")
    if result.mismatches and not getattr(args, "quiet", False):
        for plate_id, got, expected in result.mismatches:
            print(f"  mismatch {plate_id}: predicted {got!r}, truth {expected!r}")
    if result.extra_predictions and not getattr(args, "quiet", False):
        print(f"  extra predictions (not in truth): {', '.join(result.extra_predictions)}")
    if args.out:
        payload = {
            "schema": "plateflow/seq-accuracy/1",
            "accuracy": None if result.accuracy is None else round(result.accuracy, 6),
            "matched": result.matched,
            "total_truth": result.total_truth,
            "mismatches": [list(m) for m in result.mismatches],
            "extra_predictions": list(result.extra_predictions),
        }
        _write_atomic(Path(args.out), json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def _add_run_flags(parser: argparse.ArgumentParser, *, character_stage: bool) -> None:
    parser.add_argument("--backend", choices=("recorded", "runtime"), default=None,
                        help="inference source (default: recorded)")
    parser.add_argument("--fixtures", default=None, help=f"recorded fixture directory (or ${FIXTURES_ENV_VAR})")
    parser.add_argument("--plate-model", dest="plate_model", default=None, help="ONNX plate model for --backend runtime")
    if character_stage:
        parser.add_argument("--char-model", dest="char_model", default=None, help="ONNX character model for --backend runtime")
    parser.add_argument("--conf", type=float, default=None, help="confidence threshold (default 0.25)")
    parser.add_argument("--nms-iou", dest="nms_iou", type=float, default=None, help="NMS IoU threshold (default 0.45)")
    if character_stage:
        parser.add_argument("--pad", type=float, default=None, help="plate crop padding ratio (default 0.05)")
        parser.add_argument("--rows", action="store_const", const=True, default=None,
                            help="cluster characters into rows before x-sorting (two-line plates)")
    parser.add_argument("--workers", type=int, default=None, help="parallel image workers (default 1)")
    parser.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--quiet", action="store_true", help="suppress console output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="run the plate detector over an image directory")
    p_detect.add_argument("--images", required=True, help="directory of input images")
    p_detect.add_argument("--out", required=True, help="output detections file (JSON lines)")
    _add_run_flags(p_detect, character_stage=False)
    p_detect.set_defaults(func=cmd_detect)

    p_read = sub.add_parser("read", help="run the full plate reading cascade")
    p_read.add_argument("--images", required=True, help="directory of input images")
    p_read.add_argument("--out", required=True, help="output readings file (JSON lines)")
    _add_run_flags(p_read, character_stage=True)
    p_read.set_defaults(func=cmd_read)

    p_eval = sub.add_parser("eval", help="evaluate a detections file against a dataset split")
    p_eval.add_argument("--pred", required=True, help="detections file from 'detect'")
    p_eval.add_argument("--dataset", required=True, help="dataset root directory")
    p_eval.add_argument("--split", default="test", help="split name (default: test)")
    p_eval.add_argument("--classes", default=None, help="class manifest file (names list)")
    p_eval.add_argument("--preset", choices=("lpr", "character"), default="lpr",
                        help="built-in class map when --classes is not given")
    p_eval.add_argument("--out", default=None, help="report output file")
    p_eval.add_argument("--format", choices=("json", "csv"), default=None, help="report file format")
    p_eval.add_argument("--conf", type=float, default=None, help="fixed confidence for the P/R operating point")
    p_eval.add_argument("--sweep-conf", dest="sweep_conf", default=None,
                        help="comma-separated confidence cutoffs to sweep, e.g. 0.1,0.25,0.5")
    p_eval.add_argument("--config", default=None, help="flat key=value config file")
    p_eval.set_defaults(func=cmd_eval)

    p_stats = sub.add_parser("stats", help="summarize a dataset split")
    p_stats.add_argument("--dataset", required=True, help="dataset root directory")
    p_stats.add_argument("--split", default="train", help="split name (default: train)")
    p_stats.add_argument("--classes", default=None, help="class manifest file")
    p_stats.add_argument("--preset", choices=("lpr", "character"), default="lpr")
    p_stats.add_argument("--out", default=None, help="optional JSON stats output")
    p_stats.set_defaults(func=cmd_stats)

    p_seq = sub.add_parser("seq-eval", help="exact-match sequence accuracy of readings vs truth")
    p_seq.add_argument("--readings", required=True, help="readings file from 'read'")
    p_seq.add_argument("--truth", required=True, help="truth file (JSON lines of {image, [plate], text})")
    p_seq.add_argument("--out", default=None, help="optional JSON result output")
    p_seq.set_defaults(func=cmd_seq_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"plateflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"plateflow: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"plateflow: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PlateflowError as exc:
        print(f"plateflow: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"plateflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
