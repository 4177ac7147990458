from fastapi import APIRouter

from schemas.iou import IoUResult, MatchReport, MatchRequestSchema
from schemas.metrics import EllipsePairSchema
from utils.iou import iou_grid, match_and_score

router = APIRouter(prefix="/iou")


@router.post(
    "",
    response_model=IoUResult,
    summary="IoU of two ellipses on a one-point-per-pixel grid",
)
def iou(data: EllipsePairSchema) -> IoUResult:
    return iou_grid(data.a, data.b)


@router.post(
    "/match",
    response_model=MatchReport,
    summary="Greedy one-to-one matching of detections to ground truths by IoU",
)
def match(data: MatchRequestSchema) -> MatchReport:
    return match_and_score(data.detections, data.ground_truths, data.min_iou)
