"""Core value types, label-file parsing and raster image I/O."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from .errors import (
    CorruptHeader,
    DegenerateBox,
    MalformedLine,
    OutOfRange,
    UnsupportedFormat,
)

LabelMode = Literal["ground_truth", "detection"]

NORMALIZED_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Image:
    """8-bit RGB raster, stored as a read-only ``(height, width, 3)`` array."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        if arr.flags.writeable or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr).copy()
            arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> Image:
        if len(data) != width * height * 3:
            raise ValueError(
                f"buffer holds {len(data)} bytes, expected {width * height * 3}"
            )
        arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
        return cls(arr)

    @classmethod
    def blank(cls, width: int, height: int, color=(0, 0, 0)) -> Image:
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = np.asarray(color, dtype=np.uint8)
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self):
        return f"Image(width={self.width}, height={self.height})"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates (origin top-left)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        values = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite box coordinates {values}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box corners out of order: {values}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x_min, self.y_min, self.x_max, self.y_max

    def translate(self, dx: float, dy: float) -> BBox:
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def intersects(self, width: float, height: float) -> bool:
        """True when the box overlaps the ``[0, width] x [0, height]`` rectangle."""
        return self.x_min < width and self.x_max > 0 and self.y_min < height and self.y_max > 0


@dataclass(frozen=True)
class GroundTruth:
    bbox: BBox
    class_id: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    class_id: int
    confidence: float

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"negative class id {self.class_id}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def with_bbox(self, bbox: BBox) -> Detection:
        return Detection(bbox, self.class_id, self.confidence)


Label = Union[GroundTruth, Detection]


@dataclass(frozen=True)
class DatasetSample:
    id: str
    image: Image
    labels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        w, h = self.image.dims
        for label in self.labels:
            if not label.bbox.intersects(w, h):
                raise ValueError(f"{self.id}: label {label} lies outside the image")


def as_detection(label: Label) -> Detection:
    """Ground truth becomes a confidence-1 detection; detections pass through."""
    if isinstance(label, Detection):
        return label
    return Detection(label.bbox, label.class_id, 1.0)


def clip_label(label: Label, image_dims: tuple[int, int]) -> Label | None:
    """Clip a label's box to the image; None if less than a pixel remains."""
    width, height = image_dims
    b = label.bbox
    x0, y0 = max(b.x_min, 0.0), max(b.y_min, 0.0)
    x1, y1 = min(b.x_max, float(width)), min(b.y_max, float(height))
    if x1 - x0 < 1.0 or y1 - y0 < 1.0:
        return None
    if (x0, y0, x1, y1) == b.as_tuple():
        return label
    clipped = BBox(x0, y0, x1, y1)
    if isinstance(label, Detection):
        return label.with_bbox(clipped)
    return GroundTruth(clipped, label.class_id)


def clip_labels(labels: Iterable[Label], image_dims: tuple[int, int]) -> list[Label]:
    return [c for c in (clip_label(l, image_dims) for l in labels) if c is not None]


# ---------------------------------------------------------------------------
# label files: ``class cx cy w h [conf]``, coordinates normalized to [0, 1]


def _check_unit(name: str, value: float, line: str):
    if not (-NORMALIZED_TOLERANCE <= value <= 1.0 + NORMALIZED_TOLERANCE):
        raise OutOfRange(f"{name}={value} outside [0, 1] in {line!r}")


def parse_label_line(line: str, mode: LabelMode, image_dims: tuple[int, int]) -> Label:
    width, height = image_dims
    fields = line.split()
    expected = 5 if mode == "ground_truth" else 6
    if mode not in ("ground_truth", "detection"):
        raise ValueError(f"unknown label mode {mode!r}")
    if len(fields) != expected:
        raise MalformedLine(f"expected {expected} fields, got {len(fields)}: {line!r}")
    try:
        class_id = int(fields[0])
        cx, cy, w, h = (float(v) for v in fields[1:5])
        confidence = float(fields[5]) if mode == "detection" else None
    except ValueError as exc:
        raise MalformedLine(f"non-numeric field in {line!r}") from exc
    if not all(math.isfinite(v) for v in (cx, cy, w, h)):
        raise MalformedLine(f"non-finite field in {line!r}")
    if class_id < 0:
        raise OutOfRange(f"negative class id in {line!r}")
    for name, value in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
        _check_unit(name, value, line)

    if w * width < 1.0 or h * height < 1.0:
        raise DegenerateBox(f"box smaller than one pixel in {line!r}")
    bbox = BBox(
        (cx - w / 2) * width,
        (cy - h / 2) * height,
        (cx + w / 2) * width,
        (cy + h / 2) * height,
    )
    if confidence is None:
        return GroundTruth(bbox, class_id)
    if not (0.0 <= confidence <= 1.0):
        raise OutOfRange(f"confidence {confidence} outside [0, 1] in {line!r}")
    return Detection(bbox, class_id, confidence)


def parse_labels(
    text: str, mode: LabelMode, image_dims: tuple[int, int]
) -> list[Label]:
    return [
        parse_label_line(line, mode, image_dims)
        for line in text.splitlines()
        if line.strip()
    ]


def detect_mode(text: str) -> LabelMode:
    """Guess the label mode from the field count of the first record."""
    for line in text.splitlines():
        if line.strip():
            return "detection" if len(line.split()) == 6 else "ground_truth"
    return "ground_truth"


def format_label(label: Label, image_dims: tuple[int, int]) -> str:
    width, height = image_dims
    b = label.bbox
    cx = (b.x_min + b.x_max) / 2 / width
    cy = (b.y_min + b.y_max) / 2 / height
    w = b.width / width
    h = b.height / height
    text = f"{label.class_id} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"
    if isinstance(label, Detection):
        text += f" {label.confidence:.6f}"
    return text


def serialize_labels(labels: Iterable[Label], image_dims: tuple[int, int]) -> str:
    lines = [format_label(label, image_dims) for label in labels]
    return "".join(line + "\n" for line in lines)


def read_labels(path, mode: LabelMode | None, image_dims: tuple[int, int]) -> list[Label]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_labels(text, mode or detect_mode(text), image_dims)


def write_labels(path, labels: Sequence[Label], image_dims: tuple[int, int]) -> None:
    Path(path).write_text(serialize_labels(labels, image_dims), encoding="utf-8")


# ---------------------------------------------------------------------------
# image files

IMAGE_SUFFIXES = (".ppm", ".png")
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_ppm(data: bytes) -> Image:
    # header: magic, width, height, maxval, each separated by whitespace,
    # '#' comments allowed; exactly one whitespace byte precedes the payload
    tokens: list[bytes] = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CorruptHeader("truncated PPM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P6":
        raise UnsupportedFormat(f"unsupported PPM variant {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptHeader("non-integer PPM header field") from exc
    if width < 1 or height < 1:
        raise CorruptHeader(f"invalid PPM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"PPM maxval {maxval} not supported (need 255)")
    if pos >= n or not data[pos : pos + 1].isspace():
        raise CorruptHeader("missing whitespace after PPM header")
    pos += 1
    payload = data[pos:]
    expected = width * height * 3
    if len(payload) < expected:
        raise CorruptHeader(f"PPM payload truncated: {len(payload)} of {expected} bytes")
    return Image.from_bytes(width, height, payload[:expected])


def _read_png(data: bytes) -> Image:
    from PIL import Image as PILImage

    try:
        with PILImage.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("RGB", "RGBA", "P", "L", "LA", "1"):
                raise UnsupportedFormat(f"PNG mode {im.mode} not supported")
            rgb = im.convert("RGB")
    except UnsupportedFormat:
        raise
    except Exception as exc:  # Pillow raises a variety of types on bad data
        raise CorruptHeader(f"unreadable PNG: {exc}") from exc
    return Image(np.asarray(rgb, dtype=np.uint8))


def load_image(path) -> Image:
    data = Path(path).read_bytes()
    if data.startswith(b"P"):
        return _read_ppm(data)
    if data.startswith(_PNG_MAGIC):
        return _read_png(data)
    raise UnsupportedFormat(f"{path}: not a binary PPM or PNG file")


def encode_ppm(image: Image) -> bytes:
    return b"P6\n%d %d\n255\n" % (image.width, image.height) + image.tobytes()


def save_image(path, image: Image) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        path.write_bytes(encode_ppm(image))
    elif suffix == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(np.asarray(image.pixels)).save(path, format="PNG")
    else:
        raise UnsupportedFormat(f"cannot write {suffix!r} images (use .ppm or .png)")
