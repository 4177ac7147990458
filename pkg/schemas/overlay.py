from typing import List, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from schemas.ellipse import Ellipse

Color = Tuple[int, int, int]

# Colour convention of the overlays
GROUND_TRUTH_COLOR: Color = (0, 255, 0)
DETECTION_COLOR: Color = (255, 0, 0)
BASELINE_COLOR: Color = (0, 0, 255)


class OverlayGroup(BaseModel):
    label: str
    color: Color
    ellipses: List[Ellipse] = []

    @field_validator("color")
    def channels_in_range(cls, v: Color) -> Color:
        if any(not 0 <= c <= 255 for c in v):
            raise ValueError("Colour channels must lie in [0, 255]")
        return v


class OverlaySpec(BaseModel):
    image_path: str = Field(..., min_length=1)
    groups: List[OverlayGroup] = []
    stroke_width: int = Field(2, ge=1, description="Outline width (pixels)")

    @model_validator(mode="after")
    def distinct_colors(self) -> "OverlaySpec":
        colors = [g.color for g in self.groups]
        if len(colors) != len(set(colors)):
            raise ValueError("Each overlay group needs its own colour")
        return self
