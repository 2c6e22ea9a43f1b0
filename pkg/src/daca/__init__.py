"""Confident-region composite images for self-training object detectors on unlabeled domains."""

from .augment import AugOp, SampledPipeline, apply_pipeline, default_ops, ops_from_names, sample_pipeline
from .compose import CompositeResult, compose
from .config import Config
from .evaluation import average_precision, evaluate_images, iou, match_detections, mean_ap
from .harness import RecordingTrainer, adaptation_step, run_adaptation, surrogate_loss
from .mock import MockDetector, MockDetectorConfig, mock_detect
from .model import BBox, DatasetSample, Detection, GroundTruth, Image, load_image, save_image
from .selection import GridLayout, filter_confidence, select_region, trim_box

__version__ = "0.1.0"

__all__ = [
    "AugOp",
    "BBox",
    "CompositeResult",
    "Config",
    "DatasetSample",
    "Detection",
    "GridLayout",
    "GroundTruth",
    "Image",
    "MockDetector",
    "MockDetectorConfig",
    "RecordingTrainer",
    "SampledPipeline",
    "adaptation_step",
    "apply_pipeline",
    "average_precision",
    "compose",
    "default_ops",
    "evaluate_images",
    "filter_confidence",
    "iou",
    "load_image",
    "match_detections",
    "mean_ap",
    "mock_detect",
    "ops_from_names",
    "run_adaptation",
    "sample_pipeline",
    "save_image",
    "select_region",
    "surrogate_loss",
    "trim_box",
]
