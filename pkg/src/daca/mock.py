"""A ground-truth-backed stand-in detector with configurable noise."""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidConfig, UnknownImage
from .model import BBox, Detection, GroundTruth, Image, Label, as_detection
from .seeding import substream
from .selection import Rect, trim_detections

_MAX_REDRAWS = 32


@dataclass(frozen=True)
class MockDetectorConfig:
    corner_jitter_sigma: float = 2.0
    drop_probability: float = 0.05
    false_positives_per_image: float = 0.3
    confidence_base: float = 0.9
    confidence_decay: float = 4.0
    confidence_noise_sigma: float = 0.05
    false_positive_confidence: tuple[float, float] = (0.05, 0.4)
    num_classes: int = 1

    def __post_init__(self):
        object.__setattr__(self, "false_positive_confidence", tuple(self.false_positive_confidence))
        checks = [
            (self.corner_jitter_sigma >= 0, "corner_jitter_sigma must be >= 0"),
            (0 <= self.drop_probability <= 1, "drop_probability must lie in [0, 1]"),
            (self.false_positives_per_image >= 0, "false_positives_per_image must be >= 0"),
            (self.confidence_decay >= 0, "confidence_decay must be >= 0"),
            (self.confidence_noise_sigma >= 0, "confidence_noise_sigma must be >= 0"),
            (self.num_classes >= 1, "num_classes must be >= 1"),
        ]
        lo, hi = self.false_positive_confidence
        checks.append((0 <= lo <= hi <= 1, "false_positive_confidence must be 0 <= lo <= hi <= 1"))
        for ok, message in checks:
            if not ok:
                raise InvalidConfig(message)

    @classmethod
    def noise_free(cls, num_classes: int = 1) -> MockDetectorConfig:
        return cls(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, (0.05, 0.4), num_classes)

    @classmethod
    def from_dict(cls, data: dict) -> MockDetectorConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown mock detector fields {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["false_positive_confidence"] = list(self.false_positive_confidence)
        return d


def _clamped(values, width, height):
    x0, y0, x1, y1 = values
    return (
        min(max(x0, 0.0), width),
        min(max(y0, 0.0), height),
        min(max(x1, 0.0), width),
        min(max(y1, 0.0), height),
    )


def _valid(values) -> bool:
    x0, y0, x1, y1 = values
    return x1 - x0 >= 1.0 and y1 - y0 >= 1.0


def mock_detect(
    ground_truth: Sequence[Label],
    config: MockDetectorConfig,
    rng: np.random.Generator,
    image_dims: tuple[int, int],
) -> list[Detection]:
    """Perturb ground truth into plausible detections.

    Each object survives with probability ``1 - drop_probability`` and gets
    its four corners jittered by independent Gaussians. Jitter that would
    leave a box thinner than a pixel is redrawn. Confidence falls with the
    jitter magnitude relative to the image diagonal. Poisson-many uniform
    false positives with low confidences are appended.
    """
    width, height = image_dims
    diagonal = math.hypot(width, height)
    out = []
    for gt in ground_truth:
        if rng.random() < config.drop_probability:
            continue
        base = gt.bbox.as_tuple()
        offsets = np.zeros(4)
        corners = _clamped(base, width, height)
        if config.corner_jitter_sigma > 0:
            for _ in range(_MAX_REDRAWS):
                offsets = rng.normal(0.0, config.corner_jitter_sigma, 4)
                corners = _clamped([b + o for b, o in zip(base, offsets)], width, height)
                if _valid(corners):
                    break
            else:
                offsets = np.zeros(4)
                corners = _clamped(base, width, height)
        if not _valid(corners):
            continue  # object barely inside the frame
        magnitude = float(np.sqrt(np.sum(offsets**2)))
        confidence = config.confidence_base - config.confidence_decay * magnitude / diagonal
        if config.confidence_noise_sigma > 0:
            confidence += float(rng.normal(0.0, config.confidence_noise_sigma))
        confidence = min(max(confidence, 0.0), 1.0)
        out.append(Detection(BBox(*corners), gt.class_id, confidence))

    n_false = int(rng.poisson(config.false_positives_per_image)) if config.false_positives_per_image else 0
    lo, hi = config.false_positive_confidence
    for _ in range(n_false):
        bw = float(rng.uniform(min(8.0, width), max(min(8.0, width), width / 4)))
        bh = float(rng.uniform(min(8.0, height), max(min(8.0, height), height / 4)))
        x0 = float(rng.uniform(0.0, width - bw))
        y0 = float(rng.uniform(0.0, height - bh))
        class_id = int(rng.integers(config.num_classes))
        confidence = float(rng.uniform(lo, hi))
        out.append(Detection(BBox(x0, y0, x0 + bw, y0 + bh), class_id, confidence))
    return out


def image_digest(image: Image) -> str:
    h = hashlib.sha256(b"%dx%d:" % image.dims)
    h.update(image.tobytes())
    return h.hexdigest()


class MockDetector:
    """Detects by looking up the registered ground truth of an image and perturbing it.

    Noise for an image is drawn from a substream keyed by the image content,
    so the same image always yields the same detections. Composite images
    produced during adaptation are registered through
    :meth:`observe_composite`, which carries the target's truth through the
    same crop and geometric transforms as the pseudo-labels.
    """

    def __init__(self, config: MockDetectorConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self._truth: dict[str, tuple[Label, ...]] = {}

    def register(self, image: Image, ground_truth: Sequence[Label]) -> None:
        self._truth[image_digest(image)] = tuple(ground_truth)

    def truth(self, image: Image) -> tuple[Label, ...]:
        try:
            return self._truth[image_digest(image)]
        except KeyError:
            raise UnknownImage(f"no ground truth registered for {image!r}") from None

    def detect(self, image: Image) -> list[Detection]:
        digest = image_digest(image)
        truth = self.truth(image)
        rng = substream(self.seed, "mock-detector", digest)
        return mock_detect(truth, self.config, rng, image.dims)

    def observe_composite(self, target: Image, rect: Rect, composite, min_visibility: float = 0.0) -> None:
        local = trim_detections([as_detection(g) for g in self.truth(target)], rect, min_visibility)
        mapped = composite.map_boxes(local)
        self.register(composite.image, [GroundTruth(d.bbox, d.class_id) for d in mapped])
