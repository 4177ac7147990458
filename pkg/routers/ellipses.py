"""
Router for ellipse <-> Gaussian conversions and derived geometry.
"""
from fastapi import APIRouter, HTTPException, status

from schemas.ellipse import AxisBox, Ellipse, Gaussian2
from utils.ellipse import ellipse_bbox, ellipse_to_gaussian, gaussian_to_ellipse
from utils.errors import KnotdetError

router = APIRouter(prefix="/ellipse")


# ------------------------------------------------------------------------
# POST /ellipse/gaussian: ellipse -> 2D Gaussian
# ------------------------------------------------------------------------
@router.post(
    "/gaussian",
    response_model=Gaussian2,
    status_code=status.HTTP_200_OK,
    summary="Convert a 5-parameter ellipse to its 2D Gaussian",
)
def to_gaussian(ellipse: Ellipse) -> Gaussian2:
    return ellipse_to_gaussian(ellipse)


# ------------------------------------------------------------------------
# POST /ellipse/from-gaussian: 2D Gaussian -> ellipse
# ------------------------------------------------------------------------
@router.post(
    "/from-gaussian",
    response_model=Ellipse,
    summary="Recover the ellipse (major axis first) of a 2D Gaussian",
)
def from_gaussian(gaussian: Gaussian2) -> Ellipse:
    try:
        return gaussian_to_ellipse(gaussian)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())


# ------------------------------------------------------------------------
# POST /ellipse/bbox: tightest axis-aligned box
# ------------------------------------------------------------------------
@router.post(
    "/bbox",
    response_model=AxisBox,
    summary="Tightest axis-aligned bounding box of an ellipse",
)
def bbox(ellipse: Ellipse) -> AxisBox:
    return ellipse_bbox(ellipse)
