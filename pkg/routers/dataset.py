"""
Router for annotation re-parameterization and board splits.
"""
from fastapi import APIRouter, HTTPException

from schemas.dataset import KnotAnnotation, ReparameterizeRequestSchema, SplitRequestSchema, SplitResult
from utils.dataset import DEFAULT_RATIOS, reparameterize, split
from utils.errors import KnotdetError

router = APIRouter(prefix="/dataset")


@router.post(
    "/reparameterize",
    response_model=KnotAnnotation,
    summary="Express a knot in the frame of a resized square crop",
)
def reparameterize_knot(data: ReparameterizeRequestSchema) -> KnotAnnotation:
    return reparameterize(data.knot, data.x0, data.y0, data.side, data.out_size)


@router.post(
    "/split",
    response_model=SplitResult,
    summary="Deterministic board-level train/val/test split",
)
def split_boards(data: SplitRequestSchema) -> SplitResult:
    try:
        return split(data.boards, data.seed, data.ratios or DEFAULT_RATIOS)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())
