import math
from typing import Iterable

import numpy as np
from PIL import Image, ImageDraw

from schemas.align import RgbImage
from schemas.overlay import OverlayGroup, OverlaySpec
from utils.ellipse import boundary_points
from utils.images import open_image

MIN_OUTLINE_POINTS = 720


def draw_ellipses(img: Image.Image, groups: Iterable[OverlayGroup], stroke_width: int = 2) -> Image.Image:
    """Stroke every ellipse outline onto a copy of `img`; off-frame parts are clipped."""
    out = img.convert("RGB").copy()
    draw = ImageDraw.Draw(out)
    for group in groups:
        for e in group.ellipses:
            count = max(MIN_OUTLINE_POINTS, int(math.ceil(2.0 * math.pi * max(e.rx, e.ry))))
            points = boundary_points(e, count)
            outline = [(float(x), float(y)) for x, y in points]
            outline.append(outline[0])
            draw.line(outline, fill=tuple(group.color), width=stroke_width, joint="curve")
    return out


def render_overlay(spec: OverlaySpec) -> RgbImage:
    base = open_image(spec.image_path)
    drawn = draw_ellipses(base, spec.groups, spec.stroke_width)
    return RgbImage(data=np.asarray(drawn, dtype=np.uint8))
