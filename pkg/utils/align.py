"""
Column-by-column misalignment correction for scanned board images.

Each column i > 0 is shifted vertically by the s in [-max_shift, max_shift]
minimizing sum_j w_j * ||c_i^s - c_j||_k over the n previous, already shifted
columns c_j, with w_j = 1 / (i - j)^p. The shifts are searched on the grey
image and applied to the colour image.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

import config
from schemas.align import AlignConfig, AlignMethod, GrayImage, RgbImage, ShiftProfile
from utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
# Upper bound on candidate x column x row cells held at once for the L1 norm.
L1_CHUNK_CELLS = 1 << 22


def to_grayscale(img: RgbImage) -> GrayImage:
    luma = img.data.astype(np.float64) @ LUMA
    return GrayImage(data=np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8))


def _candidate_order(max_shift: int) -> np.ndarray:
    """Candidate indices (index m means shift m - max_shift) by preference: small |s|, then negative."""
    shifts = np.arange(-max_shift, max_shift + 1)
    return np.array(sorted(range(len(shifts)), key=lambda m: (abs(shifts[m]), shifts[m] > 0)))


def _candidates(column: np.ndarray, max_shift: int, pad: float) -> np.ndarray:
    """Row m holds the column moved down by m - max_shift rows, vacated rows set to pad."""
    fill = np.full(max_shift, pad, dtype=np.float64)
    padded = np.concatenate((fill, column, fill))
    return sliding_window_view(padded, column.shape[0])[::-1]


def _overlap_mask(max_shift: int, height: int) -> np.ndarray:
    shifts = np.arange(-max_shift, max_shift + 1)[:, None]
    source = np.arange(height)[None, :] - shifts
    return (source >= 0) & (source < height)


def _distances(cand: np.ndarray, prev: np.ndarray, k: int, mask: Optional[np.ndarray]) -> np.ndarray:
    """Norm distances between every candidate (rows of cand) and every previous column."""
    height = cand.shape[1]
    if mask is not None:
        cand = np.where(mask, cand, 0.0)
    if k == 2:
        # integer-valued operands keep the expansion exact in float64
        cand_sq = np.einsum("ij,ij->i", cand, cand)
        if mask is None:
            prev_sq = np.einsum("ij,ij->i", prev, prev)[None, :]
        else:
            prev_sq = mask.astype(np.float64) @ (prev * prev).T
        d2 = np.maximum(cand_sq[:, None] + prev_sq - 2.0 * (cand @ prev.T), 0.0)
        if mask is not None:
            d2 = d2 * (height / mask.sum(axis=1))[:, None]
        return np.sqrt(d2)

    out = np.empty((cand.shape[0], prev.shape[0]))
    chunk = max(1, L1_CHUNK_CELLS // max(1, prev.shape[0] * height))
    for start in range(0, cand.shape[0], chunk):
        block = cand[start:start + chunk, None, :]
        diff = np.abs(block - prev[None, :, :])
        if mask is not None:
            diff = diff * mask[start:start + chunk, None, :]
        out[start:start + chunk] = diff.sum(axis=2)
    if mask is not None:
        out = out * (height / mask.sum(axis=1))[:, None]
    return out


def optimal_shifts(gray: GrayImage, cfg: Optional[AlignConfig] = None) -> ShiftProfile:
    cfg = cfg or AlignConfig()
    height, width = gray.data.shape
    if width < 2:
        raise InvalidInputError("Alignment needs an image at least 2 columns wide")
    max_shift = min(cfg.max_shift, height - 1)
    if max_shift < cfg.max_shift:
        logger.debug("max_shift clipped from %d to %d for height %d", cfg.max_shift, max_shift, height)

    columns = gray.data.T.astype(np.float64)
    aligned = np.empty_like(columns)
    aligned[0] = columns[0]
    order = _candidate_order(max_shift)
    mask = _overlap_mask(max_shift, height) if cfg.norm_region == "overlap" else None
    pad = float(cfg.pad_value)

    shifts = [0]
    for i in range(1, width):
        lo = max(0, i - cfg.n)
        weights = 1.0 / np.arange(i - lo, 0, -1, dtype=np.float64) ** cfg.p
        cand = _candidates(columns[i], max_shift, pad)
        cost = _distances(cand, aligned[lo:i], cfg.k, mask) @ weights
        best = int(order[np.argmin(cost[order])])
        aligned[i] = cand[best]
        shifts.append(best - max_shift)

    logger.debug("eq1 shifts for %dx%d image: min %d, max %d", width, height, min(shifts), max(shifts))
    return ShiftProfile(shifts=shifts)


def shift_columns(data: np.ndarray, shifts: Sequence[int], pad) -> np.ndarray:
    """Move column i of a (height, width[, channels]) array down by shifts[i] rows."""
    height, width = data.shape[:2]
    if len(shifts) != width:
        raise InvalidInputError(f"Shift profile has {len(shifts)} entries for {width} columns")
    offsets = np.asarray(shifts, dtype=np.int64)
    source = np.arange(height)[:, None] - offsets[None, :]
    valid = (source >= 0) & (source < height)
    cols = np.broadcast_to(np.arange(width)[None, :], (height, width))
    out = np.empty_like(data)
    out[...] = np.asarray(pad, dtype=data.dtype)
    out[valid] = data[source[valid], cols[valid]]
    return out


def apply_shifts(img: RgbImage, shifts: ShiftProfile, pad: Tuple[int, int, int] = (0, 0, 0)) -> RgbImage:
    return RgbImage(data=shift_columns(img.data, shifts.shifts, pad))


def apply_shifts_gray(gray: GrayImage, shifts: ShiftProfile, pad: int = 0) -> GrayImage:
    return GrayImage(data=shift_columns(gray.data, shifts.shifts, pad))


def threshold_align(gray: GrayImage, threshold: int = config.THRESHOLD) -> ShiftProfile:
    """
    Baseline: line up the first row brighter than `threshold` in every
    column with the reference column's.
    """
    if not 0 < threshold < 255:
        raise InvalidInputError("threshold must lie in (0, 255)")
    bright = gray.data > threshold
    has_bright = bright.any(axis=0)
    if not has_bright.any():
        logger.warning("No pixel above threshold %d; returning zero shifts", threshold)
        return ShiftProfile(shifts=[0] * gray.width)
    first = bright.argmax(axis=0)
    reference = 0 if has_bright[0] else int(np.argmax(has_bright))
    if reference:
        logger.warning("Column 0 has no pixel above threshold; using column %d as reference", reference)
    shifts = np.where(has_bright, first[reference] - first, 0)
    shifts[0] = 0
    return ShiftProfile(shifts=[int(s) for s in shifts])


def shift_error(profile: ShiftProfile, truth: Sequence[int]) -> float:
    """Mean absolute per-column difference between two shift profiles."""
    if len(profile.shifts) != len(truth):
        raise InvalidInputError("Shift profiles differ in length")
    return float(np.mean(np.abs(np.asarray(profile.shifts) - np.asarray(truth))))


def align_image(
    img: RgbImage,
    cfg: Optional[AlignConfig] = None,
    method: AlignMethod = AlignMethod.EQ1,
    threshold: int = config.THRESHOLD,
) -> Tuple[RgbImage, ShiftProfile]:
    cfg = cfg or AlignConfig()
    gray = to_grayscale(img)
    if AlignMethod(method) is AlignMethod.THRESHOLD:
        profile = threshold_align(gray, threshold)
    else:
        profile = optimal_shifts(gray, cfg)
    pad = (cfg.pad_value,) * 3
    return apply_shifts(img, profile, pad), profile
