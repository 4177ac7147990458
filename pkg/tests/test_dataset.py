import json
import logging

import numpy as np
import pytest
from PIL import Image

from schemas.dataset import AnnotatedImage, CropPolicy, KnotAnnotation, Surface
from schemas.ellipse import AxisBox
from utils.dataset import (
    annotations_document,
    generate_crops,
    import_via,
    load_annotations,
    parse_annotations,
    render_crop,
    reparameterize,
    restore,
    split,
    split_images,
)
from utils.ellipse import ellipse_bbox
from utils.errors import InvalidInputError, SchemaError
from utils.iou import iou_grid

SMALL_POLICY = CropPolicy(out_size=128, min_side=64)


def _board(name="b7_wide1.png", width=300, height=200, knots=None):
    knots = knots if knots is not None else [KnotAnnotation(cx=150, cy=90, rx=20, ry=12, theta=0.4)]
    return AnnotatedImage(image=name, width=width, height=height, board_id="b7", knots=knots)


# ----------------------------------------
# reparameterize
# ----------------------------------------
def test_reparameterize_worked_example():
    knot = KnotAnnotation(cx=300, cy=250, rx=40, ry=20, theta=0.5)
    out = reparameterize(knot, 100, 50, 1024, 512)
    assert out == KnotAnnotation(cx=100, cy=100, rx=20, ry=10, theta=0.5)


def test_reparameterize_identity_and_corner():
    knot = KnotAnnotation(cx=30, cy=40, rx=5, ry=3, theta=-0.2)
    assert reparameterize(knot, 0, 0, 512, 512) == knot
    corner = reparameterize(knot, 30, 40, 256, 512)
    assert (corner.cx, corner.cy) == (0.0, 0.0)


def test_reparameterize_round_trip(rng):
    for _ in range(200):
        knot = KnotAnnotation(
            cx=rng.uniform(0, 2000), cy=rng.uniform(0, 600), rx=rng.uniform(2, 80),
            ry=rng.uniform(2, 80), theta=rng.uniform(-1.5, 1.5),
        )
        x0, y0, side = rng.uniform(0, 1000), rng.uniform(0, 300), rng.uniform(100, 900)
        back = restore(reparameterize(knot, x0, y0, side, 512), x0, y0, side, 512)
        for field in ("cx", "cy", "rx", "ry", "theta"):
            assert getattr(back, field) == pytest.approx(getattr(knot, field), abs=1e-9)


def test_reparameterize_rejects_nonpositive_side():
    with pytest.raises(InvalidInputError):
        reparameterize(KnotAnnotation(cx=1, cy=1, rx=1, ry=1), 0, 0, 0, 512)


def test_reparameterize_preserves_iou():
    a = KnotAnnotation(cx=220, cy=160, rx=40, ry=25, theta=0.3)
    b = KnotAnnotation(cx=240, cy=170, rx=35, ry=30, theta=-0.6)
    before = iou_grid(a.to_ellipse(), b.to_ellipse()).iou
    after = iou_grid(
        reparameterize(a, 100, 40, 256, 128).to_ellipse(),
        reparameterize(b, 100, 40, 256, 128).to_ellipse(),
    ).iou
    assert abs(before - after) < 0.03


# ----------------------------------------
# generate_crops
# ----------------------------------------
def test_no_knots_no_crops():
    assert generate_crops(_board(knots=[]), 5, seed=1, policy=SMALL_POLICY) == []


def test_crops_touch_a_knot_and_stay_in_frame():
    img = _board()
    crops = generate_crops(img, 5, seed=3, policy=SMALL_POLICY)
    assert len(crops) == 5
    knot_box = ellipse_bbox(img.knots[0].to_ellipse())
    for crop in crops:
        window = AxisBox(x_min=crop.x0, y_min=crop.y0, x_max=crop.x0 + crop.side, y_max=crop.y0 + crop.side)
        assert knot_box.intersects(window)
        assert SMALL_POLICY.min_side <= crop.side <= min(img.width, img.height)
        assert crop.x0 + crop.side <= img.width
        assert crop.y0 + crop.side <= img.height
        assert crop.out_size == 128
        assert len(crop.knots) == 1


def test_knots_outside_the_crop_are_dropped():
    knots = [
        KnotAnnotation(cx=40, cy=100, rx=10, ry=8),
        KnotAnnotation(cx=560, cy=100, rx=10, ry=8),
    ]
    img = _board(width=600, height=200, knots=knots)
    crops = generate_crops(img, 10, seed=11, policy=CropPolicy(out_size=128, min_side=100))
    assert crops
    # a square of side <= 200 cannot reach both knots 520 px apart
    assert all(len(c.knots) == 1 for c in crops)


def test_crops_are_deterministic():
    img = _board()
    assert generate_crops(img, 4, seed=9, policy=SMALL_POLICY) == generate_crops(img, 4, seed=9, policy=SMALL_POLICY)
    assert generate_crops(img, 4, seed=9, policy=SMALL_POLICY) != generate_crops(img, 4, seed=10, policy=SMALL_POLICY)


def test_small_image_warns(caplog):
    img = _board(width=50, height=40, knots=[KnotAnnotation(cx=20, cy=20, rx=5, ry=5)])
    with caplog.at_level(logging.WARNING):
        assert generate_crops(img, 3, seed=0, policy=SMALL_POLICY) == []
    assert "smaller than the minimum crop side" in caplog.text


def test_render_crop_resizes():
    source = Image.new("RGB", (300, 200), (120, 80, 40))
    crop = generate_crops(_board(), 1, seed=2, policy=SMALL_POLICY)[0]
    out = render_crop(source, crop)
    assert out.size == (128, 128)
    assert out.getpixel((64, 64)) == (120, 80, 40)


# ----------------------------------------
# split
# ----------------------------------------
@pytest.mark.parametrize(
    "count,expected",
    [(113, (79, 11, 23)), (10, (7, 1, 2)), (1, (1, 0, 0)), (0, (0, 0, 0))],
)
def test_split_sizes(count, expected):
    result = split([f"board{i:03d}" for i in range(count)], seed=42)
    assert (len(result.train), len(result.val), len(result.test)) == expected


def test_split_warns_on_few_boards(caplog):
    with caplog.at_level(logging.WARNING):
        split(["only"], seed=0)
    assert "Only 1 boards" in caplog.text


def test_split_is_a_deterministic_partition():
    boards = [f"b{i}" for i in range(40)]
    first = split(boards + boards[:5], seed=5)
    assert first == split(list(reversed(boards)), seed=5)
    parts = first.train + first.val + first.test
    assert sorted(parts) == sorted(boards)


def test_split_rejects_bad_ratios():
    with pytest.raises(InvalidInputError):
        split(["a", "b"], seed=0, ratios=(1.0, -0.5, 0.5))


def test_split_images_keeps_boards_together():
    images = [
        AnnotatedImage(image=f"b{i % 12}_{s}.png", width=10, height=10, board_id=f"b{i % 12}", surface=s)
        for i, s in enumerate([Surface.WIDE1, Surface.WIDE2, Surface.NARROW1, Surface.NARROW2] * 6)
    ]
    parts = split_images(images, seed=3)
    seen = {}
    for name, members in parts.items():
        for img in members:
            assert seen.setdefault(img.board_id, name) == name
    assert sum(len(m) for m in parts.values()) == len(images)


# ----------------------------------------
# annotation files
# ----------------------------------------
BAD_DOCUMENT = """{
  "image": "b1_wide1.png",
  "width": 400,
  "height": 300,
  "board_id": "b1",
  "surface": "wide1",
  "knots": [
    {"cx": 10, "cy": 20,
     "rx": -4, "ry": 3, "theta": 0}
  ]
}
"""


def test_schema_error_names_line_and_field():
    with pytest.raises(SchemaError) as info:
        parse_annotations(BAD_DOCUMENT, "ann.json")
    assert info.value.field == "knots.0.rx"
    assert info.value.line == 9
    assert "ann.json" in info.value.message


def test_schema_error_on_broken_json():
    with pytest.raises(SchemaError) as info:
        parse_annotations('{"image": "a.png",\n "width": }', "broken.json")
    assert info.value.line == 2


def test_load_directory_and_aggregate(tmp_path):
    one = _board("b1_wide1.png")
    two = _board("b2_wide1.png")
    (tmp_path / "b.json").write_text(json.dumps(two.to_document()), encoding="utf-8")
    (tmp_path / "a.json").write_text(json.dumps(one.to_document()), encoding="utf-8")
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")
    images = load_annotations(str(tmp_path))
    assert [img.image_path for img in images] == ["b1_wide1.png", "b2_wide1.png"]

    aggregated = tmp_path / "all" / "annotations.json"
    aggregated.parent.mkdir()
    aggregated.write_text(json.dumps(annotations_document(images)), encoding="utf-8")
    assert load_annotations(str(aggregated)) == images


def test_import_via_project(tmp_path):
    Image.new("RGB", (320, 240)).save(tmp_path / "b42_narrow1.png")
    project = {
        "_via_settings": {},
        "_via_img_metadata": {
            "b42_narrow1.png12345": {
                "filename": "b42_narrow1.png",
                "size": 12345,
                "file_attributes": {"surface": "narrow1"},
                "regions": [
                    {"shape_attributes": {"name": "ellipse", "cx": 100, "cy": 80, "rx": 30, "ry": 12, "theta": 0.7}},
                    {"shape_attributes": {"name": "rect", "x": 1, "y": 1, "width": 5, "height": 5}},
                ],
            }
        },
    }
    images = import_via(project, str(tmp_path))
    assert len(images) == 1
    img = images[0]
    assert (img.width, img.height) == (320, 240)
    assert img.board_id == "b42"
    assert img.surface is Surface.NARROW1
    assert img.knots == [KnotAnnotation(cx=100, cy=80, rx=30, ry=12, theta=0.7)]


def test_import_via_export_with_region_dict():
    export = {
        "scan_01.jpg": {
            "filename": "scan_01.jpg",
            "file_attributes": {"width": 1000, "height": 300, "board_id": "B-9"},
            "regions": {"0": {"shape_attributes": {"name": "ellipse", "cx": 50, "cy": 60, "rx": 9, "ry": 4}}},
        }
    }
    img = import_via(export)[0]
    assert img.board_id == "B-9"
    assert img.knots[0].theta == 0.0


def test_import_via_needs_image_size():
    export = {"x.png": {"filename": "x.png", "regions": []}}
    with pytest.raises(InvalidInputError):
        import_via(export)


def _via_export(shape=None, attributes=None):
    shape = shape if shape is not None else {"name": "ellipse", "cx": 40, "cy": 50, "rx": 12, "ry": 6}
    attributes = attributes if attributes is not None else {"width": 300, "height": 100}
    return {"b5_wide2.png": {"filename": "b5_wide2.png", "file_attributes": attributes, "regions": [shape]}}


@pytest.mark.parametrize(
    "shape,field",
    [
        ({"name": "ellipse", "cx": 40, "cy": 50, "ry": 6}, "b5_wide2.png.regions[0].shape_attributes.rx"),
        ({"name": "ellipse", "cx": 40, "cy": 50, "rx": 0, "ry": 6}, "b5_wide2.png.regions[0].shape_attributes.rx"),
        ({"name": "ellipse", "cx": "left", "cy": 50, "rx": 3, "ry": 6}, "b5_wide2.png.regions[0].shape_attributes.cx"),
    ],
)
def test_import_via_reports_bad_regions(shape, field):
    with pytest.raises(SchemaError) as info:
        import_via(_via_export(shape=shape), source="via.json")
    assert info.value.path == "via.json"
    assert info.value.field == field


def test_import_via_reports_unknown_surface():
    with pytest.raises(SchemaError) as info:
        import_via(_via_export(attributes={"width": 300, "height": 100, "surface": "edge"}), source="via.json")
    assert info.value.field == "b5_wide2.png.file_attributes.surface"


def test_import_via_reports_bad_size():
    with pytest.raises(SchemaError) as info:
        import_via(_via_export(attributes={"width": -300, "height": 100}), source="via.json")
    assert info.value.field == "b5_wide2.png.width"


def test_import_via_rejects_non_object_regions():
    export = _via_export()
    export["b5_wide2.png"]["regions"] = ["ellipse"]
    with pytest.raises(SchemaError):
        import_via(export)


def test_knot_theta_is_normalized():
    assert KnotAnnotation(cx=0, cy=0, rx=3, ry=1, theta=2.0).theta == pytest.approx(2.0 - np.pi)
    img = import_via(_via_export(shape={"name": "ellipse", "cx": 40, "cy": 50, "rx": 12, "ry": 6, "theta": 2.0}))[0]
    assert -np.pi / 2 < img.knots[0].theta <= np.pi / 2
    assert img.to_document()["knots"][0]["theta"] == pytest.approx(2.0 - np.pi)
