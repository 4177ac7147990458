"""
Annotation schema for knot datasets.

On disk an image is one JSON document
{image, width, height, board_id, surface, knots: [{cx, cy, rx, ry, theta}]}
or several of them under an aggregated {"images": [...]} document.
"""
import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

import config
from schemas.ellipse import Ellipse
from utils.angles import normalize_angle


class Surface(str, Enum):
    WIDE1 = "wide1"
    WIDE2 = "wide2"
    NARROW1 = "narrow1"
    NARROW2 = "narrow2"


# ----------------------------------------
# One annotated knot (same parameters as Ellipse)
# ----------------------------------------
class KnotAnnotation(BaseModel):
    cx: float
    cy: float
    rx: float = Field(..., gt=0)
    ry: float = Field(..., gt=0)
    theta: float = 0.0

    model_config = {"frozen": True}

    @field_validator("cx", "cy", "rx", "ry", "theta")
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Knot parameters must be finite")
        return float(v)

    @field_validator("theta")
    def normalize_theta(cls, v: float) -> float:
        return normalize_angle(v)

    def to_ellipse(self) -> Ellipse:
        return Ellipse(cx=self.cx, cy=self.cy, rx=self.rx, ry=self.ry, theta=self.theta)

    @classmethod
    def from_ellipse(cls, e: Ellipse) -> "KnotAnnotation":
        return cls(cx=e.cx, cy=e.cy, rx=e.rx, ry=e.ry, theta=e.theta)


# ----------------------------------------
# One annotated image of a board surface
# ----------------------------------------
class AnnotatedImage(BaseModel):
    image_path: str = Field(..., alias="image", min_length=1, description="Image file path")
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)
    board_id: str = Field(..., min_length=1)
    surface: Surface = Surface.WIDE1
    knots: List[KnotAnnotation] = []

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("board_id")
    def board_id_not_blank(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("board_id must not be blank")
        return v

    @model_validator(mode="after")
    def knots_near_frame(self) -> "AnnotatedImage":
        for index, k in enumerate(self.knots):
            slack = k.rx + k.ry
            if not (-slack <= k.cx <= self.width + slack and -slack <= k.cy <= self.height + slack):
                raise ValueError(f"knot {index} lies outside the image bounds")
        return self

    def to_document(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


class AnnotationDocument(BaseModel):
    images: List[AnnotatedImage]


# ----------------------------------------
# Crops
# ----------------------------------------
class CropPolicy(BaseModel):
    out_size: int = Field(config.CROP_SIZE, gt=0, description="Side of the resized crop (pixels)")
    min_side: int = Field(config.MIN_CROP_SIDE, gt=0, description="Smallest crop side (pixels)")
    max_attempts: int = Field(50, ge=1, description="Placement draws allowed per requested crop")


class CropRecord(BaseModel):
    source: str = Field(..., description="image_path of the source AnnotatedImage")
    board_id: str
    x0: int = Field(..., ge=0)
    y0: int = Field(..., ge=0)
    side: int = Field(..., gt=0)
    out_size: int = Field(config.CROP_SIZE, gt=0)
    knots: List[KnotAnnotation] = []

    def to_image(self, image_path: str, surface: Surface = Surface.WIDE1) -> AnnotatedImage:
        """Annotation document describing the resized crop itself."""
        return AnnotatedImage(
            image=image_path,
            width=self.out_size,
            height=self.out_size,
            board_id=self.board_id,
            surface=surface,
            knots=self.knots,
        )


# ----------------------------------------
# Splits
# ----------------------------------------
class SplitResult(BaseModel):
    train: List[str] = []
    val: List[str] = []
    test: List[str] = []


class ReparameterizeRequestSchema(BaseModel):
    knot: KnotAnnotation
    x0: float
    y0: float
    side: float = Field(..., gt=0)
    out_size: float = Field(config.CROP_SIZE, gt=0)


class SplitRequestSchema(BaseModel):
    boards: List[str]
    seed: int = 0
    ratios: Optional[Tuple[float, float, float]] = None
