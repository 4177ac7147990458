"""
PNG and JSON file helpers. Every write goes to a temporary file in the
target directory and is renamed into place.
"""
import json
import os
import tempfile
from io import BytesIO
from typing import Any

import numpy as np
from PIL import Image, UnidentifiedImageError

from schemas.align import GrayImage, RgbImage
from utils.errors import ImageIOError


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.splitext(path)[1])
    try:
        with os.fdopen(fd, "wb") as out_file:
            out_file.write(payload)
        os.replace(tmp, path)
    except Exception:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def open_image(path: str) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except FileNotFoundError as exc:
        raise ImageIOError(path, "file not found") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(path, "not a readable image") from exc


def load_rgb(path: str) -> RgbImage:
    return RgbImage(data=np.asarray(open_image(path).convert("RGB"), dtype=np.uint8))


def rgb_from_bytes(contents: bytes, name: str = "<upload>") -> RgbImage:
    try:
        img = Image.open(BytesIO(contents))
        img = img.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(name, "not a readable image") from exc
    return RgbImage(data=np.asarray(img, dtype=np.uint8))


def png_bytes(image: RgbImage | GrayImage) -> bytes:
    buffer = BytesIO()
    Image.fromarray(image.data).save(buffer, format="PNG")
    return buffer.getvalue()


def save_png(image: RgbImage | GrayImage, path: str) -> None:
    _atomic_write(path, png_bytes(image))


def save_pil(img: Image.Image, path: str) -> None:
    buffer = BytesIO()
    img.save(buffer, format="PNG")
    _atomic_write(path, buffer.getvalue())


def write_json(document: Any, path: str) -> None:
    payload = json.dumps(document, indent=2, ensure_ascii=False) + "\n"
    _atomic_write(path, payload.encode("utf-8"))
