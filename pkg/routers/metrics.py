"""
Router for KL / Wasserstein distances between ellipses.
"""
from fastapi import APIRouter, HTTPException, Query

from schemas.metrics import Gradient5, MetricKind, MetricRequestSchema, MetricValue
from utils.errors import KnotdetError
from utils.metrics import analytic_w2_gradient, metric_between_ellipses, metric_gradient

router = APIRouter(prefix="/metrics")


# ------------------------------------------------------------------------
# POST /metrics: distance between two ellipses
# ------------------------------------------------------------------------
@router.post(
    "",
    response_model=MetricValue,
    summary="Distance between two ellipses through their Gaussians",
)
def metric(data: MetricRequestSchema) -> MetricValue:
    """
    `kind` selects `kl` (KL(a || b)), `w2_squared` or `w2`.
    """
    try:
        return metric_between_ellipses(data.a, data.b, data.kind)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())


# ------------------------------------------------------------------------
# POST /metrics/gradient: gradient with respect to the first ellipse
# ------------------------------------------------------------------------
@router.post(
    "/gradient",
    response_model=Gradient5,
    summary="Gradient of the distance with respect to a's five parameters",
)
def gradient(
    data: MetricRequestSchema,
    analytic: bool = Query(False, description="Use the closed-form W2^2 gradient"),
) -> Gradient5:
    if analytic and data.kind is not MetricKind.W2_SQUARED:
        raise HTTPException(
            status_code=422,
            detail={"error": "invalid_input", "message": "Analytic gradients exist only for w2_squared."},
        )
    try:
        if analytic:
            return analytic_w2_gradient(data.a, data.b)
        return metric_gradient(data.a, data.b, data.kind)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())
