import numpy as np
import pytest
from conftest import det, random_box, random_image
from oracles import exact_iou

from daca import augment as A
from daca.compose import compose
from daca.errors import DimensionMismatch, InvalidConfig
from daca.model import Detection, Image
from daca.selection import GridLayout

NO_AUG = A.ops_from_names("None")


def test_identity_tiling_is_exact(rng):
    crop = random_image(rng, 300, 300)
    res = compose(crop, [det(10, 20, 100, 200)], GridLayout(2, 2), NO_AUG, 0, "x", target_dims=(600, 600))
    tiled = np.tile(crop.pixels, (2, 2, 1))
    assert np.array_equal(res.image.pixels, tiled)
    boxes = [d.bbox.as_tuple() for d in res.pseudo_labels]
    want = [(10, 20, 100, 200), (310, 20, 400, 200), (10, 320, 100, 500), (310, 320, 400, 500)]
    assert boxes == want
    assert all(exact_iou(a, b) == 1 for a, b in zip(boxes, want))


def test_offset_for_lower_left_cell(rng):
    res = compose(random_image(rng, 300, 300), [det(10, 20, 100, 200)], GridLayout(2, 2), NO_AUG, 0, "x")
    cell = res.per_cell[2]
    assert cell.offset == (0, 300)
    assert res.pseudo_labels[2].bbox.as_tuple() == (10, 320, 100, 500)


def test_single_cell_grid(rng):
    crop = random_image(rng, 600, 600)
    res = compose(crop, [det(1, 2, 3, 4)], GridLayout(1, 1), NO_AUG, 0, "x", target_dims=(600, 600))
    assert res.image == crop
    assert [d.bbox.as_tuple() for d in res.pseudo_labels] == [(1, 2, 3, 4)]


def test_non_square_grid(rng):
    crop = random_image(rng, 200, 300)
    res = compose(crop, [], GridLayout(2, 3), NO_AUG, 0, "x", target_dims=(600, 600))
    assert res.image.dims == (600, 600)
    assert np.array_equal(res.image.pixels[300:, 400:], crop.pixels)


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        compose(random_image(rng, 299, 300), [], GridLayout(2, 2), NO_AUG, 0, "x", target_dims=(600, 600))


@pytest.mark.parametrize("regions", [0, 5])
def test_regions_out_of_range(rng, regions):
    with pytest.raises(InvalidConfig):
        compose(random_image(rng, 30, 30), [], GridLayout(2, 2), NO_AUG, 0, "x", regions=regions)


@pytest.mark.parametrize("regions", [1, 2, 3, 4])
def test_region_fill_rule(rng, regions):
    crop = random_image(rng, 40, 40)
    ops = [A.AugOp(k, 1.0) for k in A.PHOTOMETRIC]
    res = compose(crop, [det(5, 5, 20, 20)], GridLayout(2, 2), ops, 3, "x", regions=regions)
    for cell in res.per_cell:
        dx, dy = cell.offset
        tile = res.image.pixels[dy : dy + 40, dx : dx + 40]
        if cell.index < regions:
            assert cell.pipeline.fired
            assert not np.array_equal(tile, crop.pixels)
        else:
            assert cell.pipeline.is_identity
            assert np.array_equal(tile, crop.pixels)


def test_cells_use_independent_substreams(rng):
    res = compose(random_image(rng, 50, 50), [], GridLayout(3, 3), A.default_ops(), 7, "img")
    traces = [c.pipeline.seed_trace for c in res.per_cell]
    assert traces == [f"7/img/{k}" for k in range(9)]
    assert len({tuple(s.draws for s in c.pipeline.ops) for c in res.per_cell}) == 9


def test_deterministic(rng):
    crop = random_image(rng, 100, 100)
    boxes = [det(10, 10, 60, 80, 0.6), det(50, 5, 99, 40, 0.4, 1)]
    a = compose(crop, boxes, GridLayout(2, 2), A.default_ops(), 11, "scene")
    b = compose(crop, boxes, GridLayout(2, 2), A.default_ops(), 11, "scene")
    assert a.image == b.image and a.pseudo_labels == b.pseudo_labels
    c = compose(crop, boxes, GridLayout(2, 2), A.default_ops(), 12, "scene")
    assert c.image != a.image


def test_no_box_crosses_a_cell_boundary():
    rng = np.random.default_rng(17)
    for case in range(24):
        rows, cols = [(2, 2), (2, 3), (3, 2), (3, 3)][case % 4]
        cw, ch = 600 // cols, 600 // rows
        crop = random_image(rng, cw, ch)
        boxes = [Detection(random_box(rng, cw, ch, 1.0), 0, 0.5) for _ in range(int(rng.integers(0, 5)))]
        ops = [A.AugOp(k, 1.0) for k in A.GEOMETRIC] + A.default_ops()[2:]
        res = compose(crop, boxes, GridLayout(rows, cols), ops, case, "b", target_dims=(600, 600))
        assert len(res.pseudo_labels) == len(boxes) * rows * cols
        for d in res.pseudo_labels:
            b = d.bbox
            i, j = int(b.y_min // ch), int(b.x_min // cw)
            assert i * ch <= b.y_min and b.y_max <= (i + 1) * ch + 1e-9
            assert j * cw <= b.x_min and b.x_max <= (j + 1) * cw + 1e-9


def test_map_boxes_replays_pseudo_labels(rng):
    crop = random_image(rng, 150, 150)
    boxes = [det(10, 10, 60, 80, 0.6), det(50, 5, 149, 40, 0.4, 1)]
    ops = [A.AugOp(k, 1.0) for k in A.KINDS]
    res = compose(crop, boxes, GridLayout(2, 2), ops, 5, "m")
    assert tuple(res.map_boxes(boxes)) == res.pseudo_labels


def test_per_cell_record_serializes(rng):
    res = compose(random_image(rng, 20, 20), [det(1, 1, 5, 5)], GridLayout(1, 2), A.default_ops(), 0, "s", regions=1)
    first, second = (c.to_dict() for c in res.per_cell)
    assert first["augmented"] and not second["augmented"]
    assert second["fired"] == [] and second["offset"] == [20, 0]
    assert first["labels"] == 1


def test_empty_boxes_still_tile(rng):
    crop = Image.blank(10, 10, (5, 5, 5))
    res = compose(crop, [], GridLayout(2, 2), A.default_ops(), 0, "e")
    assert res.pseudo_labels == ()
    assert res.image.dims == (20, 20)
