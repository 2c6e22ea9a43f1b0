"""Synthetic scenes: textured background with coloured rectangular objects."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import BBox, DatasetSample, GroundTruth, Image, save_image, write_labels
from .seeding import substream

PALETTE = np.array(
    [[220, 40, 40], [40, 180, 60], [50, 80, 220], [230, 200, 30], [160, 60, 200], [30, 200, 210]],
    dtype=np.float64,
)


def make_scene(
    rng: np.random.Generator,
    width: int = 600,
    height: int = 600,
    n_objects: int = 4,
    num_classes: int = 1,
    tint: float = 0.0,
) -> tuple[Image, list[GroundTruth]]:
    """``tint`` shifts the background colour, a crude stand-in for a domain gap."""
    yy, xx = np.mgrid[0:height, 0:width]
    base = rng.uniform(60, 140, 3) + tint
    canvas = np.empty((height, width, 3))
    for c in range(3):
        canvas[..., c] = base[c] + 30 * np.sin(xx / rng.uniform(40, 120)) + 20 * np.cos(yy / rng.uniform(40, 120))
    canvas += rng.normal(0, 6, canvas.shape)
    labels = []
    for _ in range(n_objects):
        bw = int(rng.integers(max(2, width // 20), max(3, width // 4)))
        bh = int(rng.integers(max(2, height // 20), max(3, height // 4)))
        x0 = int(rng.integers(0, width - bw + 1))
        y0 = int(rng.integers(0, height - bh + 1))
        class_id = int(rng.integers(num_classes))
        color = PALETTE[class_id % len(PALETTE)]
        canvas[y0 : y0 + bh, x0 : x0 + bw] = color + rng.normal(0, 10, (bh, bw, 3))
        labels.append(GroundTruth(BBox(x0, y0, x0 + bw, y0 + bh), class_id))
    return Image(np.clip(np.round(canvas), 0, 255).astype(np.uint8)), labels


def make_dataset(
    n: int,
    seed: int = 0,
    prefix: str = "img",
    width: int = 600,
    height: int = 600,
    n_objects: int = 4,
    num_classes: int = 1,
    tint: float = 0.0,
) -> list[DatasetSample]:
    samples = []
    for i in range(n):
        rng = substream(seed, "synthetic", prefix, i)
        image, labels = make_scene(rng, width, height, n_objects, num_classes, tint)
        samples.append(DatasetSample(f"{prefix}{i:03d}", image, labels))
    return samples


def write_dataset(samples, directory, suffix: str = ".ppm") -> Path:
    """Write ``images/<id><suffix>`` and ``labels/<id>.txt`` under ``directory``."""
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    for s in samples:
        save_image(root / "images" / f"{s.id}{suffix}", s.image)
        write_labels(root / "labels" / f"{s.id}.txt", s.labels, s.image.dims)
    return root
