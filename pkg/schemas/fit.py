import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

import config
from schemas.ellipse import Ellipse


class FitMetric(str, Enum):
    KL = "kl"
    W2_SQUARED = "w2_squared"
    L2_PARAMS = "l2"


class FitConfig(BaseModel):
    metric: FitMetric = FitMetric.W2_SQUARED
    step_size: float = Field(config.FIT_STEP, gt=0, description="Initial line-search step")
    max_iters: int = Field(config.FIT_MAX_ITERS, ge=1)
    grad_tolerance: float = Field(config.FIT_GRAD_TOL, gt=0, description="Stop when ||grad||_inf drops below")


class LossWeights(BaseModel):
    w_proposal: float = Field(1.0, ge=0)
    w_regression: float = Field(1.0, ge=0)
    w_classification: float = Field(1.0, ge=0)

    @field_validator("w_proposal", "w_regression", "w_classification")
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Loss weights must be finite")
        return v

    @model_validator(mode="after")
    def not_all_zero(self) -> "LossWeights":
        if self.w_proposal == self.w_regression == self.w_classification == 0:
            raise ValueError("At least one loss weight must be positive")
        return self


class FitTrace(BaseModel):
    metric: FitMetric
    iterations: int = Field(..., ge=0)
    final_params: Ellipse
    final_loss: float
    loss_history: List[float]
    converged: bool = Field(False, description="Gradient tolerance reached")

    def to_document(self) -> dict:
        """Trace JSON: {iterations, final: {...}, loss_history: [...]}."""
        return {
            "metric": self.metric.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "final": self.final_params.model_dump(),
            "final_loss": self.final_loss,
            "loss_history": self.loss_history,
        }

    @classmethod
    def from_document(cls, document: dict) -> "FitTrace":
        return cls(
            metric=document["metric"],
            iterations=document["iterations"],
            converged=document.get("converged", False),
            final_params=document["final"],
            final_loss=document["final_loss"],
            loss_history=document["loss_history"],
        )


class MetricBasinStats(BaseModel):
    runs: int = 0
    converged: int = 0
    diverged: int = 0
    iou_above_099: int = 0
    mean_final_iou: float = 0.0
    mean_iterations: float = 0.0


class BasinReport(BaseModel):
    metrics: Dict[FitMetric, MetricBasinStats]


# ----------------------------------------
# HTTP request bodies
# ----------------------------------------
class FitRequestSchema(BaseModel):
    init: Ellipse
    target: Ellipse
    config: Optional[FitConfig] = None


class CompositeLossRequestSchema(BaseModel):
    proposal: Ellipse
    refined: Ellipse
    target: Ellipse
    class_prob: float = Field(..., ge=0.0, le=1.0)
    is_object: bool = True
    weights: LossWeights = LossWeights()
