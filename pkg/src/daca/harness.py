"""The detect / augment / compose / adapt loop.

Each iteration pairs one source sample with one target sample. The source
pass scores the detector against ground truth; the target pass selects
the most confident cell of the target image, builds a composite from
augmented copies of it and scores the detector on the composite against
the composite pseudo-labels. The combined loss is the plain sum of both.

The detector and trainer are pluggable. :class:`RecordingTrainer` scores
with :func:`surrogate_loss` and never updates anything, which keeps the
loop fully deterministic for testing.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

from . import evaluation
from .compose import compose
from .config import Config
from .errors import EmptyDataset, NoConfidentRegion
from .model import DatasetSample, Detection, Image, Label, as_detection
from .selection import filter_confidence, select_region


@runtime_checkable
class Detector(Protocol):
    def detect(self, image: Image) -> list[Detection]: ...


class Trainer(Protocol):
    def source_loss(self, ground_truth: Sequence[Label], detections: Sequence[Detection]) -> float: ...

    def target_loss(self, pseudo_labels: Sequence[Detection], detections: Sequence[Detection]) -> float: ...

    def update(self, report: LossReport) -> None: ...


@dataclass(frozen=True)
class LossReport:
    source: float
    target: Optional[float]  # None on a skipped step

    @property
    def total(self) -> float:
        return self.source + (self.target or 0.0)


def surrogate_loss(predictions: Sequence[Detection], targets: Sequence[Label]) -> float:
    """Set-matching loss between predicted and target boxes.

    Predictions are matched greedily (confidence-descending) to same-class
    targets at IoU >= 0.5. The loss is the mean ``1 - IoU`` over matched
    pairs plus one per unmatched prediction and one per unmatched target,
    all divided by ``max(1, len(targets))``.
    """
    targets = [as_detection(t) for t in targets]
    classes = sorted({p.class_id for p in predictions} | {t.class_id for t in targets})
    overlaps = []
    unmatched_pred = 0
    for c in classes:
        m = evaluation.match_detections(predictions, targets, 0.5, c)
        boxes = [t.bbox for t in targets if t.class_id == c]
        ranked = sorted((p for p in predictions if p.class_id == c), key=lambda p: -p.confidence)
        for pred, k in zip(ranked, m.matched_gt):
            if k is not None:
                overlaps.append(evaluation.iou(pred.bbox, boxes[k]))
        unmatched_pred += m.fp
    unmatched_target = len(targets) - len(overlaps)
    mean_gap = math.fsum(1.0 - o for o in overlaps) / len(overlaps) if overlaps else 0.0
    return (mean_gap + unmatched_pred + unmatched_target) / max(1, len(targets))


class RecordingTrainer:
    """Scores with :func:`surrogate_loss` and keeps every report; performs no update."""

    def __init__(self):
        self.history: list[LossReport] = []

    def source_loss(self, ground_truth, detections) -> float:
        return surrogate_loss(detections, ground_truth)

    def target_loss(self, pseudo_labels, detections) -> float:
        return surrogate_loss(detections, pseudo_labels)

    def update(self, report: LossReport) -> None:
        self.history.append(report)


@dataclass(frozen=True)
class StepReport:
    iteration: int
    source_id: str
    target_id: str
    skipped: bool
    source_loss: float
    target_loss: Optional[float]
    total_loss: float
    cell: Optional[tuple[int, int]] = None
    mean_confidence: Optional[float] = None
    detections: int = 0  # raw target detections
    pseudo_labels: int = 0  # after the confidence filter
    trimmed_labels: int = 0  # inside the selected cell
    composite_labels: int = 0
    fired: tuple[tuple[str, ...], ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cell"] = list(self.cell) if self.cell is not None else None
        d["fired"] = [list(f) for f in self.fired]
        return d


@dataclass
class AdaptationReport:
    n_iterations: int
    steps: list[StepReport] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return sum(s.skipped for s in self.steps)

    @property
    def target_losses(self) -> list[float]:
        return [s.target_loss for s in self.steps if not s.skipped]

    def summary(self) -> dict:
        def mean(values):
            values = list(values)
            return math.fsum(values) / len(values) if values else None

        return {
            "n_iterations": self.n_iterations,
            "steps": len(self.steps),
            "skipped": self.skipped,
            "mean_source_loss": mean(s.source_loss for s in self.steps),
            "mean_target_loss": mean(self.target_losses),
            "mean_total_loss": mean(s.total_loss for s in self.steps),
            "max_source_loss": max((s.source_loss for s in self.steps), default=None),
            "max_target_loss": max(self.target_losses, default=None),
            "mean_pseudo_labels": mean(s.pseudo_labels for s in self.steps),
            "mean_composite_labels": mean(s.composite_labels for s in self.steps),
        }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in self.steps)


def adaptation_step(
    source: DatasetSample,
    target: DatasetSample,
    detector: Detector,
    trainer: Trainer,
    config: Config,
    iteration: int = 0,
) -> StepReport:
    d_source = detector.detect(source.image)
    l_source = trainer.source_loss(source.labels, d_source)

    raw = detector.detect(target.image)
    pseudo = filter_confidence(raw, config.conf_threshold)
    base = dict(
        iteration=iteration,
        source_id=source.id,
        target_id=target.id,
        detections=len(raw),
        pseudo_labels=len(pseudo),
    )
    try:
        selection = select_region(target.image, pseudo, config.grid, config.min_visibility)
    except NoConfidentRegion:
        report = LossReport(l_source, None)
        trainer.update(report)
        return StepReport(
            skipped=True, source_loss=l_source, target_loss=None, total_loss=report.total, **base
        )

    composite = compose(
        selection.crop,
        selection.pseudo_labels,
        config.grid,
        config.augment,
        config.seed,
        f"{target.id}#{iteration}",
        regions=config.regions,
        target_dims=target.image.dims,
    )
    observe = getattr(detector, "observe_composite", None)
    if observe is not None:
        observe(target.image, selection.rect, composite, config.min_visibility)

    d_target = detector.detect(composite.image)
    l_target = trainer.target_loss(composite.pseudo_labels, d_target)
    report = LossReport(l_source, l_target)
    trainer.update(report)
    return StepReport(
        skipped=False,
        source_loss=l_source,
        target_loss=l_target,
        total_loss=report.total,
        cell=selection.cell,
        mean_confidence=selection.mean_confidence,
        trimmed_labels=len(selection.pseudo_labels),
        composite_labels=len(composite.pseudo_labels),
        fired=tuple(tuple(c.pipeline.fired) for c in composite.per_cell),
        **base,
    )


def run_adaptation(
    source_set: Sequence[DatasetSample],
    target_set: Sequence[DatasetSample],
    detector: Detector,
    trainer: Trainer,
    config: Config,
) -> AdaptationReport:
    if not source_set or not target_set:
        raise EmptyDataset("both source and target sets need at least one sample")
    report = AdaptationReport(config.n_iterations)
    for i in range(config.n_iterations):
        source = source_set[i % len(source_set)]
        target = target_set[i % len(target_set)]
        report.steps.append(adaptation_step(source, target, detector, trainer, config, i))
    return report
