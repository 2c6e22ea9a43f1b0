"""Command-line front end.

Exit codes: 0 success, 1 configuration or semantic error, 2 I/O or file
format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import raster
from .augment import ops_from_names
from .compose import compose
from .config import Config, parse_size, resolve_seed
from .errors import (
    ConfigurationError,
    FormatError,
    InvalidConfig,
    InvalidParams,
    LabelError,
    NoConfidentRegion,
    NoGroundTruth,
)
from .evaluation import evaluate_images
from .harness import RecordingTrainer, run_adaptation
from .mock import MockDetector, MockDetectorConfig
from .model import (
    IMAGE_SUFFIXES,
    DatasetSample,
    Detection,
    Image,
    clip_labels,
    detect_mode,
    load_image,
    parse_label_line,
    read_labels,
    save_image,
    serialize_labels,
    write_labels,
)
from .selection import GridLayout, filter_confidence, select_region
from .synthetic import make_dataset, write_dataset

log = logging.getLogger("daca")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _image_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _split_dirs(root: Path) -> tuple[Path, Path]:
    """``root/images`` + ``root/labels`` when present, else ``root`` for both."""
    if (root / "images").is_dir():
        return root / "images", root / "labels"
    return root, root


def build_config(args) -> Config:
    """Config file, then command-line overrides; the seed falls back to ``$DACA_SEED``."""
    raw: dict = {}
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise InvalidConfig(f"{args.config}: top level must be a JSON object")
    config = Config.from_dict(raw)
    changes = {}
    if getattr(args, "image_size", None):
        changes["image_size"] = parse_size(args.image_size)
    if getattr(args, "grid", None):
        changes["grid"] = GridLayout.parse(args.grid)
    if getattr(args, "conf_threshold", None) is not None:
        changes["conf_threshold"] = args.conf_threshold
    if getattr(args, "min_visibility", None) is not None:
        changes["min_visibility"] = args.min_visibility
    if getattr(args, "regions", None) is not None:
        changes["regions"] = args.regions
    if getattr(args, "augment", None) is not None:
        try:
            changes["augment"] = tuple(ops_from_names(args.augment))
        except InvalidParams as exc:
            raise InvalidConfig(str(exc)) from exc
    if getattr(args, "iterations", None) is not None:
        changes["n_iterations"] = args.iterations
    if getattr(args, "noise_free", False):
        changes["mock"] = MockDetectorConfig.noise_free(config.mock.num_classes)
    changes["seed"] = resolve_seed(getattr(args, "seed", None), raw.get("seed"))
    return config.replace(**changes)


def _load_resized(path: Path, size: tuple[int, int]) -> Image:
    return raster.resize(load_image(path), *size)


# ---------------------------------------------------------------------------
# compose


def cmd_compose(args) -> int:
    config = build_config(args)
    images_dir = Path(args.images)
    labels_dir = Path(args.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "." + args.format
    detector = MockDetector(config.mock, config.seed) if args.mock else None

    processed, skipped = [], []
    for path in _image_files(images_dir):
        stem = path.stem
        image = _load_resized(path, config.image_size)
        label_path = labels_dir / f"{stem}.txt"
        if args.mock:
            truth = clip_labels(read_labels(label_path, "ground_truth", image.dims), image.dims)
            detector.register(image, truth)
            detections = detector.detect(image)
        else:
            detections = read_labels(label_path, "detection", image.dims)
        pseudo = filter_confidence(detections, config.conf_threshold)
        try:
            selection = select_region(image, pseudo, config.grid, config.min_visibility)
        except NoConfidentRegion:
            log.warning("%s: no detections at confidence >= %s, skipped", stem, config.conf_threshold)
            skipped.append({"id": stem, "reason": "no_confident_region", "detections": len(detections)})
            continue
        result = compose(
            selection.crop,
            selection.pseudo_labels,
            config.grid,
            config.augment,
            config.seed,
            stem,
            regions=config.regions,
            target_dims=image.dims,
        )
        save_image(out / f"{stem}_composite{suffix}", result.image)
        write_labels(out / f"{stem}_composite.txt", result.pseudo_labels, result.image.dims)
        _dump(
            out / f"{stem}_composite.json",
            {
                "id": stem,
                "cell": list(selection.cell),
                "rect": list(selection.rect),
                "mean_confidence": selection.mean_confidence,
                "detections": len(detections),
                "pseudo_labels": len(pseudo),
                "trimmed_labels": len(selection.pseudo_labels),
                "composite_labels": len(result.pseudo_labels),
                "cells": [c.to_dict() for c in result.per_cell],
            },
        )
        processed.append(stem)
    _dump(out / "summary.json", {"processed": processed, "skipped": skipped, "config": config.to_dict()})
    print(f"composed {len(processed)} image(s), skipped {len(skipped)}; outputs in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    size = parse_size(args.image_size)
    det_dir, gt_dir = Path(args.detections), Path(args.ground_truth)
    for d in (det_dir, gt_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"{d} is not a directory")
    names = None
    if args.classes:
        names = [ln.strip() for ln in Path(args.classes).read_text(encoding="utf-8").splitlines() if ln.strip()]
    gt_files = {p.stem: p for p in gt_dir.glob("*.txt")}
    det_files = {p.stem: p for p in det_dir.glob("*.txt")}
    orphans = sorted(set(det_files) - set(gt_files))
    if orphans:
        raise FileNotFoundError(f"detections without ground truth: {', '.join(orphans)}")
    images = []
    for stem in sorted(gt_files):
        gts = read_labels(gt_files[stem], "ground_truth", size)
        dets = read_labels(det_files[stem], "detection", size) if stem in det_files else []
        if names is not None:
            for label in (*gts, *dets):
                if label.class_id >= len(names):
                    raise ConfigurationError(
                        f"{stem}: class id {label.class_id} not in classes file ({len(names)} classes)"
                    )
        images.append((dets, gts))
    report = evaluate_images(images, args.iou)
    data = report.to_dict(names)
    data["images"] = len(images)
    text = json.dumps(data, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _load_samples(root: Path, size: tuple[int, int]) -> list[DatasetSample]:
    images_dir, labels_dir = _split_dirs(root)
    samples = []
    for path in _image_files(images_dir):
        image = _load_resized(path, size)
        labels = clip_labels(read_labels(labels_dir / f"{path.stem}.txt", "ground_truth", size), size)
        samples.append(DatasetSample(path.stem, image, labels))
    return samples


def cmd_simulate(args) -> int:
    config = build_config(args)
    out = Path(args.out)
    sources = _load_samples(Path(args.source), config.image_size)
    targets = _load_samples(Path(args.target), config.image_size)
    detector = MockDetector(config.mock, config.seed)
    for s in (*sources, *targets):
        detector.register(s.image, s.labels)
    # the pipeline never sees target ground truth
    unlabeled = [DatasetSample(t.id, t.image) for t in targets]
    report = run_adaptation(sources, unlabeled, detector, RecordingTrainer(), config)

    summary = report.summary()
    if targets:
        try:
            final = evaluate_images([(detector.detect(t.image), t.labels) for t in targets])
            summary["target_map"] = final.mean_ap
        except NoGroundTruth:
            summary["target_map"] = None
    summary["config"] = config.to_dict()
    out.mkdir(parents=True, exist_ok=True)
    (out / "steps.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
    _dump(out / "summary.json", summary)
    print(
        f"{len(report.steps)} step(s), {report.skipped} skipped; "
        f"mean source loss {summary['mean_source_loss']}, mean target loss {summary['mean_target_loss']}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# visualize

PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200), (128, 0, 0),
    (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
]


def class_color(class_id: int) -> tuple[int, int, int]:
    return PALETTE[class_id % len(PALETTE)]


def confidence_color(confidence: float) -> tuple[int, int, int]:
    """Red at confidence 0 through green at 1."""
    c = min(max(confidence, 0.0), 1.0)
    return int(round(255 * (1 - c))), int(round(255 * c)), 0


def draw_labels(image: Image, labels, color_by: str = "class"):
    canvas = image.pixels.copy()
    for label in labels:
        if color_by == "confidence":
            color = confidence_color(getattr(label, "confidence", 1.0))
        else:
            color = class_color(label.class_id)
        b = label.bbox
        raster.draw_rectangle(
            canvas, math.floor(b.x_min), math.floor(b.y_min), math.ceil(b.x_max), math.ceil(b.y_max), color
        )
    return Image(canvas)


def cmd_visualize(args) -> int:
    image = load_image(args.image)
    text = Path(args.labels).read_text(encoding="utf-8")
    labels = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            labels.append(parse_label_line(line, detect_mode(line), image.dims))
        except LabelError as exc:
            print(f"{args.labels}:{n}: {exc}", file=sys.stderr)
    save_image(args.out, draw_labels(image, labels, args.color_by))
    print(f"drew {len(labels)} box(es) into {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    width, height = parse_size(args.image_size)
    samples = make_dataset(
        args.n, args.seed, args.prefix, width, height, args.objects, args.classes, args.tint
    )
    root = write_dataset(samples, args.out, "." + args.format)
    if args.detections:
        detector = MockDetector(MockDetectorConfig(num_classes=args.classes), args.seed)
        det_dir = root / "detections"
        det_dir.mkdir(exist_ok=True)
        for s in samples:
            detector.register(s.image, s.labels)
            dets: list[Detection] = detector.detect(s.image)
            (det_dir / f"{s.id}.txt").write_text(serialize_labels(dets, s.image.dims), encoding="utf-8")
    print(f"wrote {len(samples)} synthetic sample(s) to {root}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="overrides the config seed and $DACA_SEED")
    p.add_argument("--image-size", help="WIDTHxHEIGHT images are resized to (default 600x600)")
    p.add_argument("--grid", help="ROWSxCOLS grid (default 2x2)")
    p.add_argument("--conf-threshold", type=float, help="pseudo-label confidence threshold (default 0.25)")
    p.add_argument("--min-visibility", type=float, help="minimum visible area fraction after trimming")
    p.add_argument("--regions", type=int, help="number of augmented cells (default: all)")
    p.add_argument("--augment", help='augmentation subset, e.g. "All", "None", "HF+D+B"')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compose", help="build composite images and pseudo-labels")
    p.add_argument("--images", required=True, help="directory of target images (.ppm/.png)")
    p.add_argument("--labels", required=True, help="directory of per-image detection files")
    p.add_argument("--out", required=True)
    p.add_argument("--mock", action="store_true", help="labels are ground truth; synthesize detections")
    p.add_argument("--format", choices=("ppm", "png"), default="ppm")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("evaluate", help="per-class AP, precision, recall and mAP")
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--classes", help="class names, one per line")
    p.add_argument("--image-size", default="600x600", help="dimensions labels are denormalized against")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run the adaptation loop with a mock detector")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--noise-free", action="store_true", help="mock detector reproduces ground truth")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("visualize", help="draw boxes onto an image")
    p.add_argument("image")
    p.add_argument("labels")
    p.add_argument("out")
    p.add_argument("--color-by", choices=("class", "confidence"), default="class")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("synth", help="write a synthetic labeled dataset")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="img")
    p.add_argument("--image-size", default="600x600")
    p.add_argument("--objects", type=int, default=4)
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--tint", type=float, default=0.0)
    p.add_argument("--format", choices=("ppm", "png"), default="ppm")
    p.add_argument("--detections", action="store_true", help="also write mock detections")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
