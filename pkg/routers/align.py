"""
Router for misalignment correction of uploaded board scans.
"""
import json
from typing import Literal

from fastapi import APIRouter, File, Form, HTTPException, UploadFile, status
from fastapi.responses import Response

import config
from schemas.align import AlignConfig, AlignMethod, ShiftProfile
from utils.align import align_image
from utils.errors import KnotdetError
from utils.images import png_bytes, rgb_from_bytes

router = APIRouter(prefix="/align")


async def _run(
    photo: UploadFile,
    method: AlignMethod,
    n: int,
    p: float,
    k: int,
    max_shift: int,
    threshold: int,
    pad_value: int,
    norm_region: str,
):
    contents = await photo.read()
    try:
        img = rgb_from_bytes(contents, photo.filename or "<upload>")
    except KnotdetError:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": "invalid_image", "message": "Uploaded file is not a valid image."},
        )
    try:
        cfg = AlignConfig(
            n=n, p=p, k=k, max_shift=max_shift, pad_value=pad_value, norm_region=norm_region
        )
    except ValueError as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail={"error": "invalid_input", "message": str(exc)},
        )
    try:
        return align_image(img, cfg, method, threshold)
    except KnotdetError as exc:
        raise HTTPException(status_code=exc.status_code, detail=exc.to_detail())


# ------------------------------------------------------------------------
# POST /align/shifts: per-column shift profile of an uploaded scan
# ------------------------------------------------------------------------
@router.post(
    "/shifts",
    response_model=ShiftProfile,
    summary="Compute the per-column shift profile of an uploaded scan",
)
async def shifts(
    photo: UploadFile = File(..., description="Board scan (PNG)"),
    method: AlignMethod = Form(AlignMethod.EQ1),
    n: int = Form(config.ALIGN_N, ge=1),
    p: float = Form(config.ALIGN_P, ge=0),
    k: int = Form(config.ALIGN_K),
    max_shift: int = Form(config.ALIGN_MAX_SHIFT, ge=0),
    threshold: int = Form(config.THRESHOLD),
    pad_value: int = Form(config.ALIGN_PAD, ge=0, le=255),
    norm_region: Literal["padded", "overlap"] = Form("padded"),
) -> ShiftProfile:
    _, profile = await _run(photo, method, n, p, k, max_shift, threshold, pad_value, norm_region)
    return profile


# ------------------------------------------------------------------------
# POST /align: aligned PNG of an uploaded scan
# ------------------------------------------------------------------------
@router.post(
    "",
    summary="Align an uploaded scan column by column and return the PNG",
    response_class=Response,
)
async def align(
    photo: UploadFile = File(..., description="Board scan (PNG)"),
    method: AlignMethod = Form(AlignMethod.EQ1),
    n: int = Form(config.ALIGN_N, ge=1),
    p: float = Form(config.ALIGN_P, ge=0),
    k: int = Form(config.ALIGN_K),
    max_shift: int = Form(config.ALIGN_MAX_SHIFT, ge=0),
    threshold: int = Form(config.THRESHOLD),
    pad_value: int = Form(config.ALIGN_PAD, ge=0, le=255),
    norm_region: Literal["padded", "overlap"] = Form("padded"),
):
    """
    The shift profile travels in the `X-Shift-Profile` header as JSON.
    """
    aligned, profile = await _run(photo, method, n, p, k, max_shift, threshold, pad_value, norm_region)
    return Response(
        content=png_bytes(aligned),
        media_type="image/png",
        headers={"X-Shift-Profile": json.dumps(profile.model_dump())},
    )
