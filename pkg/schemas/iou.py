from typing import List

from pydantic import BaseModel, Field, model_validator

from schemas.ellipse import Ellipse


class IoUResult(BaseModel):
    iou: float = Field(..., ge=0.0, le=1.0)
    intersection_samples: int = Field(..., ge=0)
    union_samples: int = Field(..., ge=0)
    grid_w: int = Field(..., ge=0, description="Grid columns (points)")
    grid_h: int = Field(..., ge=0, description="Grid rows (points)")

    @model_validator(mode="after")
    def check_counts(self) -> "IoUResult":
        if self.intersection_samples > self.union_samples:
            raise ValueError("intersection_samples cannot exceed union_samples")
        return self


class MatchPair(BaseModel):
    det: int = Field(..., ge=0, description="Detection index")
    gt: int = Field(..., ge=0, description="Ground-truth index")
    iou: float = Field(..., ge=0.0, le=1.0)


class MatchReport(BaseModel):
    pairs: List[MatchPair] = []
    unmatched_detections: List[int] = []
    unmatched_ground_truths: List[int] = []
    mean_iou_matched: float = 0.0
    mean_iou_penalized: float = 0.0


class ImageReport(MatchReport):
    image: str


class DatasetReport(BaseModel):
    images: List[ImageReport] = []
    matched_pairs: int = 0
    mean_iou_matched: float = 0.0
    mean_iou_penalized: float = 0.0


class RunSummary(BaseModel):
    """Mean and standard error over repeated evaluation runs."""

    runs: List[float]
    mean: float
    standard_error: float


# ----------------------------------------
# HTTP request bodies
# ----------------------------------------
class MatchRequestSchema(BaseModel):
    detections: List[Ellipse] = []
    ground_truths: List[Ellipse] = []
    min_iou: float = Field(0.0, ge=0.0, lt=1.0)
