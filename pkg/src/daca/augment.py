"""Box-aware augmentations and seeded augmentation pipelines.

Six transforms are available: two geometric ones that move boxes
(horizontal flip, box-safe random crop) and four photometric ones that
leave boxes untouched (blur, colour jitter, downscale,
brightness/contrast). A pipeline is sampled once from a named random
substream; every random draw is frozen into the :class:`SampledPipeline`
so applying it is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import raster
from .errors import InvalidParams
from .model import BBox, Detection, Image
from .seeding import substream, trace

HORIZONTAL_FLIP = "HorizontalFlip"
SAFE_RANDOM_CROP = "BBoxSafeRandomCrop"
BLUR = "Blur"
COLOR_JITTER = "ColorJitter"
DOWNSCALE = "Downscale"
BRIGHTNESS_CONTRAST = "BrightnessContrast"

# application order inside a pipeline
KINDS = (HORIZONTAL_FLIP, SAFE_RANDOM_CROP, BLUR, COLOR_JITTER, DOWNSCALE, BRIGHTNESS_CONTRAST)
GEOMETRIC = (HORIZONTAL_FLIP, SAFE_RANDOM_CROP)
PHOTOMETRIC = (BLUR, COLOR_JITTER, DOWNSCALE, BRIGHTNESS_CONTRAST)

ACRONYMS = {
    "HF": HORIZONTAL_FLIP,
    "SRC": SAFE_RANDOM_CROP,
    "RC": SAFE_RANDOM_CROP,
    "B": BLUR,
    "CJ": COLOR_JITTER,
    "D": DOWNSCALE,
    "BC": BRIGHTNESS_CONTRAST,
}

DEFAULT_PROBABILITY = {
    HORIZONTAL_FLIP: 0.5,
    SAFE_RANDOM_CROP: 0.2,
    BLUR: 0.5,
    COLOR_JITTER: 0.5,
    DOWNSCALE: 0.5,
    BRIGHTNESS_CONTRAST: 0.5,
}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    HORIZONTAL_FLIP: {},
    SAFE_RANDOM_CROP: {},
    BLUR: {"kernel_sizes": (3, 5, 7)},
    COLOR_JITTER: {"brightness": 0.2, "contrast": 0.2, "saturation": 0.2, "hue": 0.2},
    DOWNSCALE: {"scale_min": 0.5, "scale_max": 0.99},
    BRIGHTNESS_CONTRAST: {"brightness_limit": 0.1, "contrast_limit": 0.1},
}


def canonical_kind(name: str) -> str:
    if name in KINDS:
        return name
    key = name.strip()
    if key.upper() in ACRONYMS:
        return ACRONYMS[key.upper()]
    lowered = key.replace("_", "").replace("-", "").lower()
    for kind in KINDS:
        if kind.lower() == lowered:
            return kind
    raise InvalidParams(f"unknown augmentation {name!r}")


def _validate(kind: str, probability: float, params: Mapping[str, Any]) -> None:
    if not 0.0 <= probability <= 1.0:
        raise InvalidParams(f"{kind}: probability {probability} outside [0, 1]")
    unknown = set(params) - set(DEFAULT_PARAMS[kind])
    if unknown:
        raise InvalidParams(f"{kind}: unknown parameters {sorted(unknown)}")
    if kind == BLUR:
        sizes = tuple(params["kernel_sizes"])
        if not sizes or any(int(k) != k or k < 1 or k % 2 == 0 for k in sizes):
            raise InvalidParams(f"Blur: kernel sizes must be odd positive integers, got {sizes}")
    elif kind == COLOR_JITTER:
        for name in ("brightness", "contrast", "saturation"):
            if not 0.0 <= params[name] <= 1.0:
                raise InvalidParams(f"ColorJitter: {name}={params[name]} outside [0, 1]")
        if not 0.0 <= params["hue"] <= 0.5:
            raise InvalidParams(f"ColorJitter: hue={params['hue']} outside [0, 0.5]")
    elif kind == DOWNSCALE:
        lo, hi = params["scale_min"], params["scale_max"]
        if not 0.0 < lo <= hi <= 1.0:
            raise InvalidParams(f"Downscale: need 0 < scale_min <= scale_max <= 1, got {lo}, {hi}")
    elif kind == BRIGHTNESS_CONTRAST:
        for name in ("brightness_limit", "contrast_limit"):
            if not 0.0 <= params[name] <= 1.0:
                raise InvalidParams(f"BrightnessContrast: {name}={params[name]} outside [0, 1]")


@dataclass(frozen=True)
class AugOp:
    kind: str
    probability: float = -1.0  # negative means "use the default"
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        probability = DEFAULT_PROBABILITY[kind] if self.probability < 0 else float(self.probability)
        merged = {**DEFAULT_PARAMS[kind], **dict(self.params)}
        if kind == BLUR:
            merged["kernel_sizes"] = tuple(int(k) for k in merged["kernel_sizes"])
        _validate(kind, probability, merged)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "probability", probability)
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        params = dict(self.params)
        if "kernel_sizes" in params:
            params["kernel_sizes"] = list(params["kernel_sizes"])
        return {"kind": self.kind, "probability": self.probability, "params": params}


def default_ops() -> list[AugOp]:
    return [AugOp(kind) for kind in KINDS]


def ops_from_names(names: str | Iterable[str]) -> list[AugOp]:
    """Build an op list from acronyms, e.g. ``"HF+D+B"``, ``"All"`` or ``"None"``."""
    if isinstance(names, str):
        key = names.strip().lower()
        if key == "all":
            return default_ops()
        if key in ("none", ""):
            return []
        names = names.split("+")
    return [AugOp(name) for name in names]


@dataclass(frozen=True)
class SampledOp:
    op: AugOp
    fired: bool
    draws: tuple = ()

    def to_dict(self) -> dict:
        return {"kind": self.op.kind, "fired": self.fired, "draws": list(self.draws)}


@dataclass(frozen=True)
class SampledPipeline:
    ops: tuple[SampledOp, ...] = ()
    seed_trace: str = ""

    @property
    def fired(self) -> list[str]:
        return [s.op.kind for s in self.ops if s.fired]

    @property
    def is_identity(self) -> bool:
        return not self.fired

    def to_dict(self) -> dict:
        return {"seed_trace": self.seed_trace, "ops": [s.to_dict() for s in self.ops]}


IDENTITY = SampledPipeline()


def _draw(op: AugOp, rng: np.random.Generator) -> tuple:
    p = op.params
    if op.kind == HORIZONTAL_FLIP:
        return ()
    if op.kind == SAFE_RANDOM_CROP:
        return tuple(float(u) for u in rng.random(4))
    if op.kind == BLUR:
        sizes = p["kernel_sizes"]
        return (int(sizes[int(rng.integers(len(sizes)))]),)
    if op.kind == COLOR_JITTER:
        return (
            float(rng.uniform(1 - p["brightness"], 1 + p["brightness"])),
            float(rng.uniform(1 - p["contrast"], 1 + p["contrast"])),
            float(rng.uniform(1 - p["saturation"], 1 + p["saturation"])),
            float(rng.uniform(-p["hue"], p["hue"])),
        )
    if op.kind == DOWNSCALE:
        return (float(rng.uniform(p["scale_min"], p["scale_max"])),)
    if op.kind == BRIGHTNESS_CONTRAST:
        return (
            float(rng.uniform(-p["brightness_limit"], p["brightness_limit"])),
            float(rng.uniform(-p["contrast_limit"], p["contrast_limit"])),
        )
    raise InvalidParams(f"unknown augmentation {op.kind!r}")


def _keys(substream_id) -> tuple:
    if isinstance(substream_id, tuple):
        return substream_id
    return (substream_id,)


def sample_pipeline(ops: Sequence[AugOp], substream_id, base_seed: int) -> SampledPipeline:
    """Freeze firing decisions and random parameters for one pass over ``ops``.

    Ops are always visited in :data:`KINDS` order regardless of the order
    given. Every op consumes its parameter draws whether or not it fires,
    so toggling one probability never shifts the draws of another op.
    """
    ordered = sorted(ops, key=lambda op: KINDS.index(op.kind))
    kinds = [op.kind for op in ordered]
    if len(set(kinds)) != len(kinds):
        raise InvalidParams(f"duplicate augmentation kinds in {kinds}")
    keys = _keys(substream_id)
    rng = substream(base_seed, *keys)
    sampled = []
    for op in ordered:
        fired = bool(rng.random() < op.probability)
        sampled.append(SampledOp(op, fired, _draw(op, rng)))
    return SampledPipeline(tuple(sampled), trace(base_seed, *keys))


# ---------------------------------------------------------------------------
# box geometry


@dataclass(frozen=True)
class FlipStep:
    width: int

    def map(self, b: BBox) -> BBox:
        return BBox(self.width - b.x_max, b.y_min, self.width - b.x_min, b.y_max)


@dataclass(frozen=True)
class CropResizeStep:
    """Crop ``rect`` out of a ``width x height`` image and stretch it back to full size."""

    rect: tuple[int, int, int, int]
    width: int
    height: int

    def map(self, b: BBox) -> BBox:
        x0, y0, x1, y1 = self.rect
        sw, sh = x1 - x0, y1 - y0
        W, H = self.width, self.height
        return BBox(
            min(max((b.x_min - x0) * W / sw, 0.0), W),
            min(max((b.y_min - y0) * H / sh, 0.0), H),
            min(max((b.x_max - x0) * W / sw, 0.0), W),
            min(max((b.y_max - y0) * H / sh, 0.0), H),
        )


def _survives(box: BBox) -> bool:
    return box.width >= 1.0 and box.height >= 1.0


@dataclass(frozen=True)
class BoxTransform:
    """The geometric part of an applied pipeline, replayable on any box set."""

    steps: tuple = ()

    def map_box(self, bbox: BBox) -> Optional[BBox]:
        for step in self.steps:
            try:
                bbox = step.map(bbox)
            except ValueError:  # collapsed to zero width by clamping
                return None
        return bbox if _survives(bbox) else None

    def apply(self, boxes: Sequence[Detection]) -> list[Detection]:
        out = []
        for det in boxes:
            mapped = self.map_box(det.bbox)
            if mapped is not None:
                out.append(det.with_bbox(mapped))
        return out


# ---------------------------------------------------------------------------
# transforms


def horizontal_flip(crop: Image, boxes: Sequence[Detection]) -> tuple[Image, list[Detection]]:
    step = FlipStep(crop.width)
    return Image(crop.pixels[:, ::-1]), [d.with_bbox(step.map(d.bbox)) for d in boxes]


def safe_crop_rect(
    dims: tuple[int, int], boxes: Sequence[Detection], uniforms: Sequence[float]
) -> tuple[int, int, int, int]:
    """Integer sub-rectangle containing every box, positioned by four unit draws.

    With no boxes the whole image must be kept, so the result is the full
    rectangle.
    """
    width, height = dims
    if not boxes:
        return 0, 0, width, height
    ux0 = max(0.0, min(d.bbox.x_min for d in boxes))
    uy0 = max(0.0, min(d.bbox.y_min for d in boxes))
    ux1 = min(float(width), max(d.bbox.x_max for d in boxes))
    uy1 = min(float(height), max(d.bbox.y_max for d in boxes))

    def low(u, edge):
        limit = math.floor(edge)
        return min(math.floor(u * (limit + 1)), limit)

    def high(u, edge, size):
        start = math.ceil(edge)
        slack = size - start
        return start + min(math.floor(u * (slack + 1)), slack)

    u0, u1, u2, u3 = uniforms
    return low(u0, ux0), low(u1, uy0), high(u2, ux1, width), high(u3, uy1, height)


def crop_and_resize(
    crop: Image, boxes: Sequence[Detection], rect: tuple[int, int, int, int]
) -> tuple[Image, list[Detection]]:
    step = CropResizeStep(tuple(rect), crop.width, crop.height)
    return _crop_resize_image(crop, step), BoxTransform((step,)).apply(boxes)


def _crop_resize_image(crop: Image, step: CropResizeStep) -> Image:
    x0, y0, x1, y1 = step.rect
    if (x0, y0, x1, y1) == (0, 0, crop.width, crop.height):
        return crop
    return raster.resize(raster.crop(crop, x0, y0, x1, y1), crop.width, crop.height)


def bbox_safe_random_crop(
    crop: Image, boxes: Sequence[Detection], rng: np.random.Generator
) -> tuple[Image, list[Detection]]:
    rect = safe_crop_rect(crop.dims, boxes, rng.random(4))
    return crop_and_resize(crop, boxes, rect)


def blur(image: Image, k: int) -> Image:
    return raster.from_float(raster.box_filter(raster.as_float(image), k))


def color_jitter(
    image: Image, brightness: float, contrast: float, saturation: float, hue_shift: float
) -> Image:
    """Brightness, contrast, saturation and hue factors, applied in that order."""
    v = np.clip(raster.as_float(image) * brightness, 0, 255)
    mean = raster.luma(v).mean()
    v = np.clip(mean + contrast * (v - mean), 0, 255)
    gray = raster.luma(v)[..., None]
    v = np.clip(gray + saturation * (v - gray), 0, 255)
    if hue_shift != 0.0:
        hsv = raster.rgb_to_hsv(v / 255.0)
        hsv[..., 0] = (hsv[..., 0] + hue_shift) % 1.0
        v = np.clip(raster.hsv_to_rgb(hsv) * 255.0, 0, 255)
    return raster.from_float(v)


def downscale(image: Image, scale: float) -> Image:
    w, h = image.dims
    small_w = max(1, math.floor(w * scale + 0.5))
    small_h = max(1, math.floor(h * scale + 0.5))
    if (small_w, small_h) == (w, h):
        return image
    small = raster.resize_float(raster.as_float(image), small_w, small_h)
    return raster.from_float(raster.resize_float(small, w, h))


def brightness_contrast(image: Image, brightness: float, contrast: float) -> Image:
    """Add ``brightness * 255``, then scale contrast by ``1 + contrast`` about the mean luma."""
    v = np.clip(raster.as_float(image) + brightness * 255.0, 0, 255)
    mean = raster.luma(v).mean()
    return raster.from_float(mean + (1.0 + contrast) * (v - mean))


def _apply_photometric_draws(image: Image, kind: str, draws: tuple) -> Image:
    if kind == BLUR:
        return blur(image, draws[0])
    if kind == COLOR_JITTER:
        return color_jitter(image, *draws)
    if kind == DOWNSCALE:
        return downscale(image, draws[0])
    if kind == BRIGHTNESS_CONTRAST:
        return brightness_contrast(image, *draws)
    raise InvalidParams(f"{kind} is not a photometric augmentation")


def apply_photometric(
    crop: Image, kind: str, params: Mapping[str, Any], rng: np.random.Generator
) -> Image:
    op = AugOp(kind, 1.0, params)
    if op.kind not in PHOTOMETRIC:
        raise InvalidParams(f"{op.kind} is not a photometric augmentation")
    return _apply_photometric_draws(crop, op.kind, _draw(op, rng))


def apply_pipeline_traced(
    crop: Image, boxes: Sequence[Detection], pipeline: SampledPipeline
) -> tuple[Image, list[Detection], BoxTransform]:
    """Like :func:`apply_pipeline`, also returning the geometric box mapping used."""
    image = crop
    current = list(boxes)
    steps = []
    for sampled in pipeline.ops:
        if not sampled.fired:
            continue
        kind = sampled.op.kind
        if kind == HORIZONTAL_FLIP:
            step = FlipStep(image.width)
            image = Image(image.pixels[:, ::-1])
        elif kind == SAFE_RANDOM_CROP:
            rect = safe_crop_rect(image.dims, current, sampled.draws)
            step = CropResizeStep(rect, image.width, image.height)
            image = _crop_resize_image(image, step)
        else:
            image = _apply_photometric_draws(image, kind, sampled.draws)
            continue
        steps.append(step)
        current = BoxTransform((step,)).apply(current)
    transform = BoxTransform(tuple(steps))
    # boxes are re-derived through the composed transform so that any other
    # box set mapped with `transform` gets bit-identical coordinates
    return image, transform.apply(boxes), transform


def apply_pipeline(
    crop: Image, boxes: Sequence[Detection], pipeline: SampledPipeline
) -> tuple[Image, list[Detection]]:
    image, out, _ = apply_pipeline_traced(crop, boxes, pipeline)
    return image, out
