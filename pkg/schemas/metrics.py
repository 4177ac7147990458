import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from schemas.ellipse import Ellipse

# Numerical floor tolerated for a nonnegative quantity.
NEGATIVE_FLOOR = -1e-9


class MetricKind(str, Enum):
    KL = "kl"
    W2_SQUARED = "w2_squared"
    W2 = "w2"


class MetricValue(BaseModel):
    value: float
    kind: MetricKind

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_nonnegative(self) -> "MetricValue":
        if not math.isfinite(self.value):
            raise ValueError("Metric value must be finite")
        if self.value < NEGATIVE_FLOOR:
            raise ValueError(f"{self.kind.value} must be nonnegative, got {self.value}")
        return self


class Gradient5(BaseModel):
    d_cx: float
    d_cy: float
    d_rx: float
    d_ry: float
    d_theta: float
    degenerate: bool = Field(
        False, description="True when the theta direction is undefined (near-circular ellipse)"
    )

    model_config = {"frozen": True}

    @field_validator("d_cx", "d_cy", "d_rx", "d_ry", "d_theta")
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Gradient entries must be finite")
        return v

    @classmethod
    def from_array(cls, values, degenerate: bool = False) -> "Gradient5":
        v = [float(x) for x in np.asarray(values, dtype=float).reshape(5)]
        return cls(d_cx=v[0], d_cy=v[1], d_rx=v[2], d_ry=v[3], d_theta=v[4], degenerate=degenerate)

    def as_array(self) -> np.ndarray:
        return np.array([self.d_cx, self.d_cy, self.d_rx, self.d_ry, self.d_theta])


# ----------------------------------------
# HTTP request bodies
# ----------------------------------------
class EllipsePairSchema(BaseModel):
    a: Ellipse
    b: Ellipse


class MetricRequestSchema(EllipsePairSchema):
    kind: MetricKind = Field(MetricKind.W2_SQUARED, description="Distance to evaluate")
