"""Composite images tiled from augmented copies of one crop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .augment import IDENTITY, AugOp, BoxTransform, SampledPipeline, apply_pipeline_traced, sample_pipeline
from .errors import DimensionMismatch, InvalidConfig
from .model import Detection, Image
from .selection import GridLayout


@dataclass(frozen=True)
class CellRecord:
    index: int
    pipeline: SampledPipeline
    label_count: int
    transform: BoxTransform
    offset: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "cell": self.index,
            "offset": list(self.offset),
            "labels": self.label_count,
            "augmented": bool(self.pipeline.ops),
            "fired": self.pipeline.fired,
            **self.pipeline.to_dict(),
        }


@dataclass(frozen=True)
class CompositeResult:
    image: Image
    pseudo_labels: tuple[Detection, ...]
    per_cell: tuple[CellRecord, ...]

    def map_boxes(self, boxes: Sequence[Detection]) -> list[Detection]:
        """Send crop-local boxes through every cell's geometry, as the pseudo-labels were."""
        out = []
        for cell in self.per_cell:
            dx, dy = cell.offset
            out.extend(d.with_bbox(d.bbox.translate(dx, dy)) for d in cell.transform.apply(boxes))
        return out


def compose(
    crop: Image,
    boxes: Sequence[Detection],
    grid: GridLayout,
    ops: Sequence[AugOp],
    base_seed: int,
    image_id: str,
    regions: Optional[int] = None,
    target_dims: Optional[tuple[int, int]] = None,
) -> CompositeResult:
    """Tile ``grid.rows x grid.cols`` augmented copies of ``crop`` row-major.

    Cell ``k`` (row-major) draws its pipeline from substream
    ``(base_seed, image_id, k)``. Only the first ``regions`` cells are
    augmented; the rest hold the crop unchanged.
    """
    cw, ch = crop.dims
    if target_dims is not None:
        tw, th = target_dims
        if (tw, th) != (cw * grid.cols, ch * grid.rows):
            raise DimensionMismatch(
                f"crop {cw}x{ch} on a {grid} grid gives {cw * grid.cols}x{ch * grid.rows}, "
                f"expected {tw}x{th}"
            )
    n_aug = grid.n_cells if regions is None else regions
    if not 1 <= n_aug <= grid.n_cells:
        raise InvalidConfig(f"regions={regions} must lie in [1, {grid.n_cells}]")

    canvas = np.empty((ch * grid.rows, cw * grid.cols, 3), dtype=np.uint8)
    labels: list[Detection] = []
    cells = []
    for i, j in grid.cells():
        k = i * grid.cols + j
        pipeline = sample_pipeline(ops, (image_id, k), base_seed) if k < n_aug else IDENTITY
        image, cell_boxes, transform = apply_pipeline_traced(crop, boxes, pipeline)
        dx, dy = j * cw, i * ch
        canvas[dy : dy + ch, dx : dx + cw] = image.pixels
        labels.extend(d.with_bbox(d.bbox.translate(dx, dy)) for d in cell_boxes)
        cells.append(CellRecord(k, pipeline, len(cell_boxes), transform, (dx, dy)))
    return CompositeResult(Image(canvas), tuple(labels), tuple(cells))
