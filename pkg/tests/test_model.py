import numpy as np
import pytest
from conftest import random_image

from daca.errors import CorruptHeader, DegenerateBox, MalformedLine, OutOfRange, UnsupportedFormat
from daca.model import (
    BBox,
    Detection,
    GroundTruth,
    Image,
    clip_label,
    load_image,
    parse_label_line,
    parse_labels,
    save_image,
    serialize_labels,
)


def test_parse_ground_truth_centered_half_box():
    gt = parse_label_line("0 0.5 0.5 0.5 0.5", "ground_truth", (600, 600))
    assert isinstance(gt, GroundTruth)
    assert gt.class_id == 0
    assert gt.bbox.as_tuple() == (150, 150, 450, 450)


def test_parse_detection_denormalizes_by_hand():
    d = parse_label_line("2 0.5 0.5 0.2 0.2 0.25", "detection", (600, 600))
    assert isinstance(d, Detection)
    assert d.class_id == 2
    # 0.5*600 -/+ 0.2*600/2
    assert d.bbox.as_tuple() == pytest.approx((240, 240, 360, 360), abs=1e-9)
    assert d.confidence == 0.25


@pytest.mark.parametrize(
    "line, mode, error",
    [
        ("0 0.5 0.5 0.5", "ground_truth", MalformedLine),
        ("0 0.5 0.5 0.5 0.5", "detection", MalformedLine),
        ("0 0.5 0.5 0.5 0.5 0.9", "ground_truth", MalformedLine),
        ("a 0.5 0.5 0.5 0.5", "ground_truth", MalformedLine),
        ("0 0.5 x 0.5 0.5", "ground_truth", MalformedLine),
        ("0.0 0.5 0.5 0.5 0.5", "ground_truth", MalformedLine),
        ("0 1.2 0.5 0.5 0.5", "ground_truth", OutOfRange),
        ("0 0.5 -0.01 0.5 0.5", "ground_truth", OutOfRange),
        ("-1 0.5 0.5 0.5 0.5", "ground_truth", OutOfRange),
        ("0 0.5 0.5 0.5 0.5 1.5", "detection", OutOfRange),
        ("0 0.5 0.5 0.001 0.5", "ground_truth", DegenerateBox),
    ],
)
def test_parse_errors(line, mode, error):
    with pytest.raises(error):
        parse_label_line(line, mode, (600, 600))


def test_normalized_tolerance_accepts_tiny_overshoot():
    gt = parse_label_line("0 1.0000005 0.5 0.5 0.5", "ground_truth", (600, 600))
    assert gt.bbox.x_max > 600


def test_serialize_inverse_example():
    text = serialize_labels([GroundTruth(BBox(150, 150, 450, 450), 0)], (600, 600))
    assert text == "0 0.500000 0.500000 0.500000 0.500000\n"


def test_serialize_empty():
    assert serialize_labels([], (600, 600)) == ""


def _close(a, b, tol):
    if type(a) is not type(b) or a.class_id != b.class_id:
        return False
    if isinstance(a, Detection) and abs(a.confidence - b.confidence) > 1e-6:
        return False
    return all(abs(x - y) <= tol for x, y in zip(a.bbox.as_tuple(), b.bbox.as_tuple()))


@pytest.mark.parametrize("mode", ["ground_truth", "detection"])
def test_round_trip_100_random_label_sets(mode):
    # label sets as they exist on disk: six-decimal normalized values
    rng = np.random.default_rng(7)
    for _ in range(100):
        dims = (int(rng.integers(50, 1000)), int(rng.integers(50, 1000)))
        lines = []
        for _ in range(int(rng.integers(0, 8))):
            w, h = rng.uniform(0.05, 0.5, 2)
            cx, cy = rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2)
            line = f"{rng.integers(0, 5)} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"
            if mode == "detection":
                line += f" {rng.uniform():.6f}"
            lines.append(line)
        labels = parse_labels("\n".join(lines), mode, dims)
        again = parse_labels(serialize_labels(labels, dims), mode, dims)
        assert len(again) == len(labels)
        assert all(_close(a, b, 1e-5) for a, b in zip(labels, again))


def test_round_trip_of_arbitrary_floats_is_bounded_by_print_precision(rng):
    dims = (600, 400)
    for _ in range(100):
        x0, y0 = rng.uniform(0, 300), rng.uniform(0, 200)
        label = GroundTruth(BBox(x0, y0, x0 + rng.uniform(2, 290), y0 + rng.uniform(2, 190)), 1)
        (back,) = parse_labels(serialize_labels([label], dims), "ground_truth", dims)
        # each normalized value is printed to within 5e-7
        assert _close(label, back, 1e-6 * max(dims))


def test_bbox_rejects_inverted_corners():
    with pytest.raises(ValueError):
        BBox(10, 0, 10, 5)
    with pytest.raises(ValueError):
        BBox(0, 5, 10, 1)


def test_detection_confidence_bounds():
    with pytest.raises(ValueError):
        Detection(BBox(0, 0, 1, 1), 0, 1.01)


def test_clip_label():
    g = GroundTruth(BBox(-10, 5, 50, 700), 3)
    assert clip_label(g, (600, 600)).bbox.as_tuple() == (0, 5, 50, 600)
    assert clip_label(GroundTruth(BBox(599.5, 0, 640, 10), 0), (600, 600)) is None


# images


def test_ppm_literal_layout(tmp_path):
    p = tmp_path / "two.ppm"
    p.write_bytes(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0]))
    img = load_image(p)
    assert (img.width, img.height) == (2, 1)
    assert list(img.tobytes()) == [255, 0, 0, 0, 255, 0]


def test_ppm_header_with_comment(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6 # made by hand\n1 1 255\n" + bytes([1, 2, 3]))
    assert list(load_image(p).tobytes()) == [1, 2, 3]


def test_ppm_round_trip_is_byte_exact(tmp_path, rng):
    img = random_image(rng, 600, 600)
    p, q = tmp_path / "a.ppm", tmp_path / "b.ppm"
    save_image(p, img)
    loaded = load_image(p)
    assert loaded == img
    save_image(q, loaded)
    assert p.read_bytes() == q.read_bytes()


def test_png_round_trip(tmp_path, rng):
    img = random_image(rng, 37, 21)
    p = tmp_path / "a.png"
    save_image(p, img)
    assert load_image(p) == img


@pytest.mark.parametrize(
    "payload, error",
    [
        (b"P6\n2 2\n255\n" + bytes(5), CorruptHeader),
        (b"P6\n2", CorruptHeader),
        (b"P6\n0 2\n255\n", CorruptHeader),
        (b"P6\n1 1\n65535\n" + bytes(6), UnsupportedFormat),
        (b"P3\n1 1\n255\n0 0 0\n", UnsupportedFormat),
        (b"GIF89a", UnsupportedFormat),
        (b"\x89PNG\r\n\x1a\n garbage", CorruptHeader),
    ],
)
def test_malformed_images(tmp_path, payload, error):
    p = tmp_path / "bad.img"
    p.write_bytes(payload)
    with pytest.raises(error):
        load_image(p)


def test_missing_file_is_oserror(tmp_path):
    with pytest.raises(OSError):
        load_image(tmp_path / "nope.ppm")


def test_unknown_output_format(tmp_path):
    with pytest.raises(UnsupportedFormat):
        save_image(tmp_path / "x.jpg", Image.blank(2, 2))


def test_image_is_immutable(rng):
    img = random_image(rng, 4, 4)
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1
