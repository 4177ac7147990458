"""
Router for ellipse fitting and the composite detection loss.
"""
from fastapi import APIRouter, HTTPException, status

from schemas.fit import CompositeLossRequestSchema, FitRequestSchema, FitTrace
from utils.errors import KnotdetError
from utils.fit import composite_loss, fit_ellipse

router = APIRouter(prefix="/fit")


# ------------------------------------------------------------------------
# POST /fit: gradient descent from init to target
# ------------------------------------------------------------------------
@router.post(
    "",
    response_model=FitTrace,
    summary="Fit an ellipse to a target by gradient descent on a distance",
)
def fit(data: FitRequestSchema) -> FitTrace:
    """
    Returns the full trace. A diverging fit answers 422 with error `divergence`.
    """
    try:
        return fit_ellipse(data.init, data.target, data.config)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())


# ------------------------------------------------------------------------
# POST /fit/composite-loss: weighted proposal + regression + classification loss
# ------------------------------------------------------------------------
@router.post(
    "/composite-loss",
    status_code=status.HTTP_200_OK,
    summary="Weighted sum of proposal KL, regression W2^2 and cross entropy",
)
def loss(data: CompositeLossRequestSchema):
    try:
        value = composite_loss(
            data.proposal, data.refined, data.target, data.class_prob, data.is_object, data.weights
        )
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())
    return {"status": "success", "loss": value}
