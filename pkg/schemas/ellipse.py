"""
Canonical ellipse, Gaussian and box types.

An Ellipse stores the annotation-style parameters: (rx, ry) are the
semi-diameters along the ellipse's own axes before rotation, theta the
counterclockwise rotation in radians.
"""
import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from utils.angles import normalize_angle

SYMMETRY_RTOL = 1e-9


# ----------------------------------------
# Ellipse (cx, cy, rx, ry, theta)
# ----------------------------------------
class Ellipse(BaseModel):
    cx: float = Field(..., description="Center x (pixels)")
    cy: float = Field(..., description="Center y (pixels)")
    rx: float = Field(..., gt=0, description="Semi-diameter along the first axis (pixels)")
    ry: float = Field(..., gt=0, description="Semi-diameter along the second axis (pixels)")
    theta: float = Field(0.0, description="Counterclockwise rotation (radians)")

    model_config = {"frozen": True}

    @field_validator("cx", "cy", "rx", "ry", "theta")
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Ellipse parameters must be finite")
        return float(v)

    @field_validator("theta")
    def normalize_theta(cls, v: float) -> float:
        return normalize_angle(v)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.rx, self.ry, self.theta], dtype=float)

    @property
    def area(self) -> float:
        return math.pi * self.rx * self.ry


# ----------------------------------------
# Gaussian2: mean vector and 2x2 SPD covariance
# ----------------------------------------
class Gaussian2(BaseModel):
    mu: Tuple[float, float] = Field(..., description="Mean vector (pixels)")
    sigma: Tuple[Tuple[float, float], Tuple[float, float]] = Field(
        ..., description="Covariance matrix (pixels^2), symmetric positive definite"
    )

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_spd(self) -> "Gaussian2":
        values = [*self.mu, *self.sigma[0], *self.sigma[1]]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("Gaussian parameters must be finite")
        (a, b), (c, d) = self.sigma
        scale = max(abs(a), abs(b), abs(c), abs(d), 1e-300)
        if abs(b - c) > SYMMETRY_RTOL * scale:
            raise ValueError("Covariance must be symmetric")
        if a <= 0 or d <= 0 or a * d - b * c <= 0:
            raise ValueError("Covariance must be positive definite")
        return self

    @classmethod
    def from_arrays(cls, mu, sigma) -> "Gaussian2":
        mu = np.asarray(mu, dtype=float).reshape(2)
        sigma = np.asarray(sigma, dtype=float).reshape(2, 2)
        return cls(
            mu=(float(mu[0]), float(mu[1])),
            sigma=(
                (float(sigma[0, 0]), float(sigma[0, 1])),
                (float(sigma[1, 0]), float(sigma[1, 1])),
            ),
        )

    @property
    def mean(self) -> np.ndarray:
        return np.array(self.mu, dtype=float)

    @property
    def cov(self) -> np.ndarray:
        return np.array(self.sigma, dtype=float)


# ----------------------------------------
# AxisBox: axis-aligned bounding box
# ----------------------------------------
class AxisBox(BaseModel):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_order(self) -> "AxisBox":
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("Box minimum must not exceed maximum")
        return self

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def intersects(self, other: "AxisBox") -> bool:
        """True when the two boxes share a region of positive area."""
        return (
            min(self.x_max, other.x_max) > max(self.x_min, other.x_min)
            and min(self.y_max, other.y_max) > max(self.y_min, other.y_min)
        )

    def union(self, other: "AxisBox") -> "AxisBox":
        return AxisBox(
            x_min=min(self.x_min, other.x_min),
            y_min=min(self.y_min, other.y_min),
            x_max=max(self.x_max, other.x_max),
            y_max=max(self.y_max, other.y_max),
        )
