"""Confident-region selection on a regular grid.

The target image is split into ``rows x cols`` equal cells. Each detection
is assigned to the cell containing its box centre, every cell is scored by
the mean confidence of its detections, and the best cell is cropped. All
detections overlapping that cell are clipped to it and re-expressed in
crop-local coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from . import raster
from .errors import InvalidConfig, InvalidThreshold, NoConfidentRegion, NonDivisibleGrid
from .model import BBox, Detection, Image


class Rect(NamedTuple):
    """Integer pixel rectangle, half-open: ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


@dataclass(frozen=True)
class GridLayout:
    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise InvalidConfig(f"grid dimensions must be integers: {self.rows}x{self.cols}")
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfig(f"grid needs at least one row and column: {self.rows}x{self.cols}")

    @classmethod
    def parse(cls, text: str) -> GridLayout:
        """Parse ``"ROWSxCOLS"`` (e.g. ``"2x3"``)."""
        m = re.fullmatch(r"\s*(\d+)\s*[xX×]\s*(\d+)\s*", text)
        if not m:
            raise InvalidConfig(f"grid must look like 2x2, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self):
        return f"{self.rows}x{self.cols}"

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell_size(self, dims: tuple[int, int]) -> tuple[int, int]:
        """Cell ``(width, height)`` for an image of ``dims``; raises if it does not tile."""
        width, height = dims
        if width % self.cols or height % self.rows:
            raise NonDivisibleGrid(
                f"image {width}x{height} is not divisible by a {self} grid"
            )
        return width // self.cols, height // self.rows

    def cell_rect(self, row: int, col: int, dims: tuple[int, int]) -> Rect:
        cw, ch = self.cell_size(dims)
        return Rect(col * cw, row * ch, (col + 1) * cw, (row + 1) * ch)

    def cells(self):
        """Cell indices in row-major order."""
        for i in range(self.rows):
            for j in range(self.cols):
                yield i, j


@dataclass(frozen=True)
class RegionSelection:
    cell: tuple[int, int]
    rect: Rect
    crop: Image
    pseudo_labels: tuple[Detection, ...]
    mean_confidence: float
    candidates: int  # detections offered for trimming


def assign_cell(bbox: BBox, grid: GridLayout, dims: tuple[int, int]) -> tuple[int, int]:
    cw, ch = grid.cell_size(dims)
    cx, cy = bbox.center
    row = min(max(math.floor(cy / ch), 0), grid.rows - 1)
    col = min(max(math.floor(cx / cw), 0), grid.cols - 1)
    return row, col


def cell_confidences(
    detections: Sequence[Detection], grid: GridLayout, dims: tuple[int, int]
) -> list[list[Optional[float]]]:
    grid.cell_size(dims)
    buckets: list[list[list[float]]] = [[[] for _ in range(grid.cols)] for _ in range(grid.rows)]
    for det in detections:
        i, j = assign_cell(det.bbox, grid, dims)
        buckets[i][j].append(det.confidence)
    return [
        [math.fsum(confs) / len(confs) if confs else None for confs in row]
        for row in buckets
    ]


def best_cell(scores: list[list[Optional[float]]]) -> Optional[tuple[int, int]]:
    """Row-major argmax over populated cells; the first maximum wins ties."""
    best = None
    best_score = -math.inf
    for i, row in enumerate(scores):
        for j, score in enumerate(row):
            if score is not None and score > best_score:
                best, best_score = (i, j), score
    return best


def trim_box(bbox: BBox, rect: Rect, min_visibility: float = 0.0) -> Optional[BBox]:
    x0 = max(bbox.x_min, rect.x0)
    y0 = max(bbox.y_min, rect.y0)
    x1 = min(bbox.x_max, rect.x1)
    y1 = min(bbox.y_max, rect.y1)
    if x1 - x0 < 1.0 or y1 - y0 < 1.0:
        return None
    if (x1 - x0) * (y1 - y0) < min_visibility * bbox.area:
        return None
    return BBox(x0 - rect.x0, y0 - rect.y0, x1 - rect.x0, y1 - rect.y0)


def trim_detections(
    detections: Sequence[Detection], rect: Rect, min_visibility: float = 0.0
) -> list[Detection]:
    out = []
    for det in detections:
        box = trim_box(det.bbox, rect, min_visibility)
        if box is not None:
            out.append(det.with_bbox(box))
    return out


def select_region(
    image: Image,
    detections: Sequence[Detection],
    grid: GridLayout,
    min_visibility: float = 0.0,
) -> RegionSelection:
    if not 0.0 <= min_visibility <= 1.0:
        raise InvalidConfig(f"min_visibility {min_visibility} outside [0, 1]")
    scores = cell_confidences(detections, grid, image.dims)
    cell = best_cell(scores)
    if cell is None:
        raise NoConfidentRegion("no detections to select a region from")
    rect = grid.cell_rect(*cell, image.dims)
    return RegionSelection(
        cell=cell,
        rect=rect,
        crop=raster.crop(image, *rect),
        pseudo_labels=tuple(trim_detections(detections, rect, min_visibility)),
        mean_confidence=scores[cell[0]][cell[1]],
        candidates=len(detections),
    )


def filter_confidence(detections: Sequence[Detection], threshold: float) -> list[Detection]:
    if not 0.0 <= threshold <= 1.0:
        raise InvalidThreshold(f"confidence threshold {threshold} outside [0, 1]")
    return [d for d in detections if d.confidence >= threshold]
