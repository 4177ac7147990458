from enum import Enum
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

import config


# ----------------------------------------
# Raster images (row-major numpy arrays)
# ----------------------------------------
class GrayImage(BaseModel):
    data: np.ndarray = Field(..., description="uint8 array of shape (height, width)")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("data")
    def check_raster(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("GrayImage data must be a non-empty 2D array")
        if v.dtype != np.uint8:
            if v.min() < 0 or v.max() > 255:
                raise ValueError("Intensities must lie in [0, 255]")
            v = v.astype(np.uint8)
        return v

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])


class RgbImage(BaseModel):
    data: np.ndarray = Field(..., description="uint8 array of shape (height, width, 3)")

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("data")
    def check_raster(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim != 3 or v.shape[2] != 3 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError("RgbImage data must have shape (height, width, 3)")
        if v.dtype != np.uint8:
            if v.min() < 0 or v.max() > 255:
                raise ValueError("Channel values must lie in [0, 255]")
            v = v.astype(np.uint8)
        return v

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])


# ----------------------------------------
# Alignment configuration and output
# ----------------------------------------
class AlignMethod(str, Enum):
    EQ1 = "eq1"
    THRESHOLD = "threshold"


class AlignConfig(BaseModel):
    n: int = Field(config.ALIGN_N, ge=1, description="Number of previous columns compared")
    p: float = Field(config.ALIGN_P, ge=0, description="Exponent of the inverse-distance weights")
    k: Literal[1, 2] = Field(config.ALIGN_K, description="Norm order")
    max_shift: int = Field(config.ALIGN_MAX_SHIFT, ge=0, description="Largest |shift| searched (pixels)")
    pad_value: int = Field(config.ALIGN_PAD, ge=0, le=255, description="Intensity of vacated pixels")
    norm_region: Literal["padded", "overlap"] = Field(
        "padded",
        description="Compare full padded columns, or only the rows the shift keeps in frame",
    )


class ShiftProfile(BaseModel):
    shifts: List[int]

    @field_validator("shifts")
    def first_column_fixed(cls, v: List[int]) -> List[int]:
        if v and v[0] != 0:
            raise ValueError("The first column's shift must be 0")
        return v
