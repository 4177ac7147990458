"""
Annotation I/O, crop generation with ellipse re-parameterization, VIA
import and board-level splitting.
"""
import json
import logging
import math
import os
import zlib
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from pydantic import ValidationError

from schemas.dataset import (
    AnnotatedImage,
    AnnotationDocument,
    CropPolicy,
    CropRecord,
    KnotAnnotation,
    SplitResult,
    Surface,
)
from schemas.ellipse import AxisBox
from utils.ellipse import ellipse_bbox
from utils.errors import ImageIOError, InvalidInputError, SchemaError
from utils.images import open_image

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.7, 0.1, 0.2)
MIN_BOARDS_FOR_SPLIT = 10


# ------------------------------------------------------------------------
# Re-parameterization
# ------------------------------------------------------------------------
def reparameterize(
    knot: KnotAnnotation, x0: float, y0: float, side: float, out_size: float
) -> KnotAnnotation:
    """Express a knot in the frame of a square crop resized to out_size."""
    if side <= 0 or out_size <= 0:
        raise InvalidInputError("Crop side and output size must be positive")
    s = out_size / side
    return KnotAnnotation(
        cx=(knot.cx - x0) * s,
        cy=(knot.cy - y0) * s,
        rx=knot.rx * s,
        ry=knot.ry * s,
        theta=knot.theta,
    )


def restore(knot: KnotAnnotation, x0: float, y0: float, side: float, out_size: float) -> KnotAnnotation:
    """Inverse of reparameterize."""
    if side <= 0 or out_size <= 0:
        raise InvalidInputError("Crop side and output size must be positive")
    s = side / out_size
    return KnotAnnotation(
        cx=knot.cx * s + x0,
        cy=knot.cy * s + y0,
        rx=knot.rx * s,
        ry=knot.ry * s,
        theta=knot.theta,
    )


# ------------------------------------------------------------------------
# Crop generation
# ------------------------------------------------------------------------
def _image_rng(seed: int, image_path: str) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(image_path.encode("utf-8"))])


def _overlap_range(lo: float, hi: float, side: int, limit: int) -> Tuple[int, int]:
    """Integer origins whose [x0, x0 + side] window overlaps (lo, hi), within [0, limit - side]."""
    first = max(0, math.floor(lo - side) + 1)
    last = min(limit - side, math.ceil(hi) - 1)
    return first, last


def generate_crops(
    img: AnnotatedImage,
    count: int,
    seed: int,
    policy: Optional[CropPolicy] = None,
) -> List[CropRecord]:
    """
    Up to `count` square crops that each overlap at least one knot's bounding
    box. Knots fully outside a crop are dropped; partially visible ones are kept.
    """
    policy = policy or CropPolicy()
    if not img.knots or count <= 0:
        return []
    short = min(img.width, img.height)
    if short < policy.min_side:
        logger.warning(
            "%s: %dx%d is smaller than the minimum crop side %d; no crops generated",
            img.image_path, img.width, img.height, policy.min_side,
        )
        return []

    rng = _image_rng(seed, img.image_path)
    boxes = [ellipse_bbox(k.to_ellipse()) for k in img.knots]
    crops: List[CropRecord] = []
    attempts = 0
    while len(crops) < count and attempts < count * policy.max_attempts:
        attempts += 1
        side = int(rng.integers(policy.min_side, short + 1))
        anchor = boxes[int(rng.integers(len(boxes)))]
        x_first, x_last = _overlap_range(anchor.x_min, anchor.x_max, side, img.width)
        y_first, y_last = _overlap_range(anchor.y_min, anchor.y_max, side, img.height)
        if x_first > x_last or y_first > y_last:
            continue
        x0 = int(rng.integers(x_first, x_last + 1))
        y0 = int(rng.integers(y_first, y_last + 1))
        window = AxisBox(x_min=x0, y_min=y0, x_max=x0 + side, y_max=y0 + side)

        kept = [
            reparameterize(knot, x0, y0, side, policy.out_size)
            for knot, box in zip(img.knots, boxes)
            if box.intersects(window)
        ]
        if not kept:
            continue
        crops.append(
            CropRecord(
                source=img.image_path,
                board_id=img.board_id,
                x0=x0,
                y0=y0,
                side=side,
                out_size=policy.out_size,
                knots=kept,
            )
        )

    if len(crops) < count:
        logger.warning("%s: only %d of %d crops placed", img.image_path, len(crops), count)
    return crops


def render_crop(source: Image.Image, crop: CropRecord) -> Image.Image:
    """Cut the crop square out of the source image and resize it."""
    region = source.convert("RGB").crop((crop.x0, crop.y0, crop.x0 + crop.side, crop.y0 + crop.side))
    return region.resize((crop.out_size, crop.out_size), Image.LANCZOS)


# ------------------------------------------------------------------------
# Splitting
# ------------------------------------------------------------------------
def _largest_remainder(total: int, ratios: Sequence[float]) -> List[int]:
    weights = np.asarray(ratios, dtype=float)
    if len(weights) != 3 or np.any(weights < 0) or weights.sum() <= 0:
        raise InvalidInputError("ratios must be three nonnegative numbers with a positive sum")
    exact = total * weights / weights.sum()
    counts = np.floor(exact + 1e-9).astype(int)
    remainder = total - int(counts.sum())
    # largest fractional part first; earlier parts win ties
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return [int(c) for c in counts]


def split(boards: Iterable[str], seed: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> SplitResult:
    """Deterministic train/val/test partition of board ids."""
    unique = sorted(set(boards))
    if not unique:
        return SplitResult()
    if len(unique) < MIN_BOARDS_FOR_SPLIT:
        logger.warning("Only %d boards; some splits will be empty", len(unique))
    n_train, n_val, _ = _largest_remainder(len(unique), ratios)
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    shuffled = [unique[i] for i in rng.permutation(len(unique))]
    return SplitResult(
        train=shuffled[:n_train],
        val=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
    )


def split_images(
    images: Sequence[AnnotatedImage], seed: int, ratios: Sequence[float] = DEFAULT_RATIOS
) -> Dict[str, List[AnnotatedImage]]:
    """Board-level split of annotated images: all images of a board share a part."""
    parts = split((img.board_id for img in images), seed, ratios)
    lookup = {board: name for name in ("train", "val", "test") for board in getattr(parts, name)}
    out: Dict[str, List[AnnotatedImage]] = {"train": [], "val": [], "test": []}
    for img in images:
        out[lookup[img.board_id]].append(img)
    return out


# ------------------------------------------------------------------------
# Annotation files
# ------------------------------------------------------------------------
def _line_of(text: str, loc: Sequence) -> Optional[int]:
    """Best-effort line of the JSON value addressed by a pydantic error location."""
    position = 0
    found = False
    for part in loc:
        if isinstance(part, str):
            index = text.find(f'"{part}"', position)
            if index < 0:
                break
            position = index
            found = True
    return text.count("\n", 0, position) + 1 if found else None


def parse_annotations(text: str, path: str = "<memory>") -> List[AnnotatedImage]:
    """Parse one image document or an aggregated {"images": [...]} document."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(path, exc.lineno, None, exc.msg) from exc
    if not isinstance(document, dict):
        raise SchemaError(path, 1, None, "expected a JSON object")
    try:
        if "images" in document:
            return AnnotationDocument.model_validate(document).images
        return [AnnotatedImage.model_validate(document)]
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise SchemaError(path, _line_of(text, error["loc"]), field, error["msg"]) from exc


def load_annotations(path: str) -> List[AnnotatedImage]:
    """Load a JSON annotation file, or every *.json file of a directory (sorted)."""
    if os.path.isdir(path):
        images: List[AnnotatedImage] = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                images.extend(load_annotations(os.path.join(path, name)))
        return images
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ImageIOError(path, exc.strerror or "cannot read file") from exc
    return parse_annotations(text, path)


def annotations_document(images: Sequence[AnnotatedImage]) -> dict:
    return {"images": [img.to_document() for img in images]}


# ------------------------------------------------------------------------
# VIA import
# ------------------------------------------------------------------------
def _via_entries(document: dict, source: str) -> List[dict]:
    if not isinstance(document, dict):
        raise SchemaError(source, None, None, "expected a JSON object")
    metadata = document.get("_via_img_metadata", document)
    if not isinstance(metadata, dict):
        raise SchemaError(source, None, "_via_img_metadata", "expected a JSON object")
    return [entry for entry in metadata.values() if isinstance(entry, dict) and "filename" in entry]


def _via_knot(shape: dict, source: str, where: str) -> KnotAnnotation:
    missing = [key for key in ("cx", "cy", "rx", "ry") if key not in shape]
    if missing:
        raise SchemaError(source, None, f"{where}.{missing[0]}", "field required")
    try:
        return KnotAnnotation(
            cx=shape["cx"],
            cy=shape["cy"],
            rx=shape["rx"],
            ry=shape["ry"],
            theta=shape.get("theta", 0.0),
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise SchemaError(source, None, f"{where}.{field}", error["msg"]) from exc


def import_via(document: dict, image_dir: Optional[str] = None, source: str = "<via>") -> List[AnnotatedImage]:
    """
    Convert a VIA project or export (1.x or 2.x) into annotated images.
    Only ellipse regions are kept; malformed entries raise SchemaError
    naming `source` and the offending field.
    """
    images: List[AnnotatedImage] = []
    for entry in _via_entries(document, source):
        filename = entry["filename"]
        attributes = entry.get("file_attributes") or {}
        if not isinstance(attributes, dict):
            raise SchemaError(source, None, f"{filename}.file_attributes", "expected a JSON object")
        regions = entry.get("regions") or []
        if isinstance(regions, dict):
            regions = list(regions.values())
        if not isinstance(regions, list):
            raise SchemaError(source, None, f"{filename}.regions", "expected a list or an object")

        knots = []
        for i, region in enumerate(regions):
            where = f"{filename}.regions[{i}].shape_attributes"
            shape = region.get("shape_attributes") if isinstance(region, dict) else None
            if not isinstance(shape, dict):
                raise SchemaError(source, None, where, "expected a JSON object")
            if shape.get("name") != "ellipse":
                continue
            knots.append(_via_knot(shape, source, where))

        image_path = os.path.join(image_dir, filename) if image_dir else filename
        if os.path.isfile(image_path):
            width, height = open_image(image_path).size
        else:
            width, height = attributes.get("width"), attributes.get("height")
            if not width or not height:
                raise InvalidInputError(f"{filename}: image not found and no width/height attributes")

        try:
            surface = Surface(attributes.get("surface", Surface.WIDE1.value))
        except ValueError as exc:
            allowed = ", ".join(s.value for s in Surface)
            raise SchemaError(
                source, None, f"{filename}.file_attributes.surface", f"expected one of {allowed}"
            ) from exc

        stem = os.path.splitext(os.path.basename(filename))[0]
        try:
            images.append(
                AnnotatedImage(
                    image=image_path,
                    width=width,
                    height=height,
                    board_id=str(attributes.get("board_id") or stem.split("_")[0]),
                    surface=surface,
                    knots=knots,
                )
            )
        except ValidationError as exc:
            error = exc.errors()[0]
            field = ".".join(str(part) for part in error["loc"])
            raise SchemaError(source, None, f"{filename}.{field}" if field else filename, error["msg"]) from exc
    return images
