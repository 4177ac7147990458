import numpy as np
import pytest
from pydantic import ValidationError

from schemas.ellipse import Ellipse
from schemas.overlay import DETECTION_COLOR, GROUND_TRUTH_COLOR, OverlayGroup, OverlaySpec
from utils.ellipse import boundary_points
from utils.errors import ImageIOError
from utils.render import render_overlay


@pytest.fixture
def base_image(tmp_path, rng, write_png):
    data = rng.integers(0, 100, size=(120, 160, 3), dtype=np.uint8)
    return write_png(tmp_path / "base.png", data), data


def test_empty_groups_leave_image_unchanged(base_image):
    path, data = base_image
    out = render_overlay(OverlaySpec(image_path=path, groups=[]))
    np.testing.assert_array_equal(out.data, data)


def test_outline_pixels_hug_the_boundary(base_image):
    path, data = base_image
    e = Ellipse(cx=80, cy=60, rx=40, ry=20, theta=0.5)
    spec = OverlaySpec(
        image_path=path,
        groups=[OverlayGroup(label="ground truth", color=GROUND_TRUTH_COLOR, ellipses=[e])],
        stroke_width=2,
    )
    out = render_overlay(spec)
    changed = np.argwhere(np.any(out.data != data, axis=2))
    assert len(changed) > 0

    outline = boundary_points(e, 4000)
    ys, xs = changed[:, 0], changed[:, 1]
    gaps = np.hypot(xs[:, None] - outline[None, :, 0], ys[:, None] - outline[None, :, 1]).min(axis=1)
    assert gaps.max() <= spec.stroke_width / 2 + 1.5
    assert np.all(out.data[ys, xs] == GROUND_TRUTH_COLOR)


def test_off_frame_ellipse_is_clipped(base_image):
    path, data = base_image
    spec = OverlaySpec(
        image_path=path,
        groups=[OverlayGroup(label="detections", color=DETECTION_COLOR,
                             ellipses=[Ellipse(cx=-10, cy=60, rx=30, ry=25)])],
    )
    out = render_overlay(spec)
    assert out.data.shape == data.shape
    assert np.any(out.data != data)


def test_unreadable_image(tmp_path):
    bogus = tmp_path / "not-an-image.png"
    bogus.write_bytes(b"plain text")
    with pytest.raises(ImageIOError):
        render_overlay(OverlaySpec(image_path=str(bogus)))
    with pytest.raises(ImageIOError):
        render_overlay(OverlaySpec(image_path=str(tmp_path / "missing.png")))


def test_overlay_groups_need_distinct_colours():
    with pytest.raises(ValidationError):
        OverlaySpec(
            image_path="x.png",
            groups=[
                OverlayGroup(label="a", color=GROUND_TRUTH_COLOR),
                OverlayGroup(label="b", color=GROUND_TRUTH_COLOR),
            ],
        )
    with pytest.raises(ValidationError):
        OverlaySpec(image_path="x.png", stroke_width=0)
