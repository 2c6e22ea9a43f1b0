"""Detection metrics: IoU, greedy matching, precision/recall, AP and mAP.

AP uses all-point interpolation: the area under the precision envelope,
where the envelope at recall ``r`` is the best precision reached at any
recall ``>= r``. It is summed in exact rationals and rounded once.

Multi-image evaluation pools detections of a class across images, ranks
them by confidence (stable, so ties keep image order then input order) and
matches each detection only against ground truth of its own image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidThreshold, NoGroundTruth
from .model import BBox, Detection, GroundTruth, Label

ImagePair = tuple[Sequence[Detection], Sequence[Label]]


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class MatchResult:
    """Matching outcome for one class, detections in ranked order."""

    flags: tuple[bool, ...]
    confidences: tuple[float, ...]
    n_gt: int
    matched_gt: tuple[Optional[int], ...] = ()

    @property
    def tp(self) -> int:
        return sum(self.flags)

    @property
    def fp(self) -> int:
        return len(self.flags) - self.tp

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


def _check_threshold(iou_threshold: float):
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidThreshold(f"IoU threshold {iou_threshold} outside (0, 1]")


def _match_one(dets, gts, iou_threshold, class_id):
    """Ranked (confidence, flag, gt index) triples for one image."""
    ranked = sorted(
        (d for d in dets if d.class_id == class_id), key=lambda d: -d.confidence
    )
    boxes = [g.bbox for g in gts if g.class_id == class_id]
    taken = [False] * len(boxes)
    out = []
    for det in ranked:
        best, best_iou = None, iou_threshold
        for k, box in enumerate(boxes):
            if taken[k]:
                continue
            overlap = iou(det.bbox, box)
            if overlap >= best_iou and (best is None or overlap > best_iou):
                best, best_iou = k, overlap
        if best is not None:
            taken[best] = True
        out.append((det.confidence, best is not None, best))
    return out, len(boxes)


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[Label],
    iou_threshold: float = 0.5,
    class_id: int = 0,
) -> MatchResult:
    _check_threshold(iou_threshold)
    ranked, n_gt = _match_one(dets, gts, iou_threshold, class_id)
    return MatchResult(
        flags=tuple(f for _, f, _ in ranked),
        confidences=tuple(c for c, _, _ in ranked),
        n_gt=n_gt,
        matched_gt=tuple(g for _, _, g in ranked),
    )


def match_images(
    images: Sequence[ImagePair], iou_threshold: float = 0.5, class_id: int = 0
) -> MatchResult:
    _check_threshold(iou_threshold)
    pooled = []
    n_gt = 0
    for dets, gts in images:
        ranked, n = _match_one(dets, gts, iou_threshold, class_id)
        pooled.extend(ranked)
        n_gt += n
    # per-image order is already confidence-descending; a stable sort keeps it
    pooled.sort(key=lambda item: -item[0])
    return MatchResult(
        flags=tuple(f for _, f, _ in pooled),
        confidences=tuple(c for c, _, _ in pooled),
        n_gt=n_gt,
    )


@dataclass(frozen=True)
class ApResult:
    class_id: int
    ap: float
    precision: float
    recall: float
    n_gt: int
    n_det: int
    tp: int
    points: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "precision": self.precision,
            "recall": self.recall,
            "num_gt": self.n_gt,
            "num_det": self.n_det,
            "tp": self.tp,
        }


def _exact_ap(flags: np.ndarray, tp: np.ndarray, n_gt: int) -> Fraction:
    """All-point interpolated AP in rational arithmetic.

    Recall rises by ``1 / n_gt`` at each true positive, where the
    interpolated precision is the best ``tp_j / j`` at any rank ``j`` at or
    after it.
    """
    total = Fraction(0)
    best = Fraction(0)
    for k in range(len(flags) - 1, -1, -1):
        p = Fraction(int(tp[k]), k + 1)
        if p > best:
            best = p
        if flags[k]:
            total += best
    return total / n_gt


def ap_from_match(match: MatchResult, class_id: int = 0) -> ApResult:
    if match.n_gt == 0:
        raise NoGroundTruth(f"class {class_id} has no ground truth; AP is undefined")
    flags = np.asarray(match.flags, dtype=bool)
    tp = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1)
    precision = tp / ranks
    recall = tp / match.n_gt
    if len(flags):
        ap = float(_exact_ap(flags, tp, match.n_gt))
        end_precision = float(precision[-1])
    else:
        ap = 0.0
        end_precision = 0.0
    return ApResult(
        class_id=class_id,
        ap=ap,
        precision=end_precision,
        recall=match.tp / match.n_gt,
        n_gt=match.n_gt,
        n_det=len(flags),
        tp=match.tp,
        points=tuple(zip(recall.tolist(), precision.tolist())),
    )


def average_precision(
    dets: Sequence[Detection],
    gts: Sequence[Label],
    class_id: int = 0,
    iou_threshold: float = 0.5,
) -> ApResult:
    return ap_from_match(match_detections(dets, gts, iou_threshold, class_id), class_id)


def average_precision_images(
    images: Sequence[ImagePair], class_id: int = 0, iou_threshold: float = 0.5
) -> ApResult:
    return ap_from_match(match_images(images, iou_threshold, class_id), class_id)


@dataclass(frozen=True)
class EvalReport:
    iou_threshold: float
    per_class: dict[int, ApResult]
    unscored: dict[int, int]  # class -> detections without any ground truth
    mean_ap: float

    def to_dict(self, class_names: Optional[Sequence[str]] = None) -> dict:
        def name(c):
            return class_names[c] if class_names and c < len(class_names) else str(c)

        return {
            "iou_threshold": self.iou_threshold,
            "classes": {name(c): r.to_dict() for c, r in sorted(self.per_class.items())},
            "unscored_detections": {name(c): n for c, n in sorted(self.unscored.items())},
            "map": self.mean_ap,
        }


def evaluate_images(images: Sequence[ImagePair], iou_threshold: float = 0.5) -> EvalReport:
    _check_threshold(iou_threshold)
    gt_classes = sorted({g.class_id for _, gts in images for g in gts})
    if not gt_classes:
        raise NoGroundTruth("no ground truth boxes in any class")
    per_class = {
        c: average_precision_images(images, c, iou_threshold) for c in gt_classes
    }
    unscored: dict[int, int] = {}
    for dets, _ in images:
        for d in dets:
            if d.class_id not in per_class:
                unscored[d.class_id] = unscored.get(d.class_id, 0) + 1
    mean = math.fsum(r.ap for r in per_class.values()) / len(per_class)
    return EvalReport(iou_threshold, per_class, unscored, mean)


def mean_ap(
    dets: Sequence[Detection], gts: Sequence[Label], iou_threshold: float = 0.5
) -> float:
    return evaluate_images([(dets, gts)], iou_threshold).mean_ap


def precision_recall(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], class_id: int = 0, iou_threshold: float = 0.5
) -> tuple[float, float]:
    r = average_precision(dets, gts, class_id, iou_threshold)
    return r.precision, r.recall
