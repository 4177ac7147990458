"""
Ellipse IoU by discretized sampling, an interval-counting oracle and
detection/ground-truth matching.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np

from schemas.dataset import AnnotatedImage
from schemas.ellipse import AxisBox, Ellipse
from schemas.iou import DatasetReport, ImageReport, IoUResult, MatchPair, MatchReport, RunSummary
from utils.ellipse import contains_points, ellipse_bbox
from utils.errors import InvalidInputError

logger = logging.getLogger(__name__)

# Covering rectangles smaller than this (in pixels, either side) are supersampled.
SUBPIXEL_SIDE = 4.0
SUPERSAMPLE = 16
# Points evaluated per chunk of rows in iou_grid.
CHUNK_POINTS = 1 << 20
MIN_ORACLE_SAMPLES = 256


def covering_box(a: Ellipse, b: Ellipse) -> AxisBox:
    return ellipse_bbox(a).union(ellipse_bbox(b))


def iou_grid(a: Ellipse, b: Ellipse) -> IoUResult:
    """
    IoU counted on a grid with one point per pixel location over the tightest
    axis-aligned rectangle covering both ellipses. Points sit at integer
    coordinates; sub-pixel rectangles are sampled 16x denser.
    """
    box = covering_box(a, b)
    step = 1.0
    if box.width < SUBPIXEL_SIDE or box.height < SUBPIXEL_SIDE:
        step = 1.0 / SUPERSAMPLE
    xs = np.arange(math.ceil(box.x_min / step), math.floor(box.x_max / step) + 1) * step
    ys = np.arange(math.ceil(box.y_min / step), math.floor(box.y_max / step) + 1) * step

    inter = union = 0
    if len(xs) and len(ys):
        rows_per_chunk = max(1, CHUNK_POINTS // len(xs))
        for start in range(0, len(ys), rows_per_chunk):
            gy = ys[start:start + rows_per_chunk, None]
            in_a = contains_points(a, xs[None, :], gy)
            in_b = contains_points(b, xs[None, :], gy)
            inter += int(np.count_nonzero(in_a & in_b))
            union += int(np.count_nonzero(in_a | in_b))

    iou = inter / union if union else 0.0
    return IoUResult(
        iou=iou,
        intersection_samples=inter,
        union_samples=union,
        grid_w=len(xs),
        grid_h=len(ys),
    )


def _row_intervals(e: Ellipse, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """x-interval [lo, hi] of the ellipse interior on each horizontal line y."""
    c, s = math.cos(e.theta), math.sin(e.theta)
    inv_x, inv_y = 1.0 / (e.rx * e.rx), 1.0 / (e.ry * e.ry)
    qa = c * c * inv_x + s * s * inv_y
    qb = c * s * (inv_x - inv_y)
    det_q = inv_x * inv_y
    dy = ys - e.cy
    disc = qa - det_q * dy * dy
    root = np.sqrt(np.maximum(disc, 0.0))
    lo = e.cx + (-qb * dy - root) / qa
    hi = e.cx + (-qb * dy + root) / qa
    empty = disc < 0
    lo[empty] = np.inf
    hi[empty] = -np.inf
    return lo, hi


def _count_in(lo: np.ndarray, hi: np.ndarray, x0: float, step: float, n: int) -> np.ndarray:
    """Number of cell-centred samples x0 + (i + 0.5) * step inside [lo, hi], per row."""
    with np.errstate(invalid="ignore"):
        first = np.ceil((lo - x0) / step - 0.5)
        last = np.floor((hi - x0) / step - 0.5)
    first = np.clip(np.nan_to_num(first, nan=n, posinf=n, neginf=0), 0, n)
    last = np.clip(np.nan_to_num(last, nan=-1, posinf=n - 1, neginf=-1), -1, n - 1)
    return np.maximum(last - first + 1, 0)


def iou_oracle(a: Ellipse, b: Ellipse, samples_per_axis: int = 2048) -> float:
    """
    IoU over samples_per_axis^2 cell-centred samples of the covering
    rectangle, counted row by row from the exact chord of each ellipse.
    """
    if samples_per_axis < MIN_ORACLE_SAMPLES:
        raise InvalidInputError(f"samples_per_axis must be >= {MIN_ORACLE_SAMPLES}")
    box = covering_box(a, b)
    n = int(samples_per_axis)
    step_x = box.width / n
    step_y = box.height / n
    ys = box.y_min + (np.arange(n) + 0.5) * step_y

    lo_a, hi_a = _row_intervals(a, ys)
    lo_b, hi_b = _row_intervals(b, ys)
    count_a = _count_in(lo_a, hi_a, box.x_min, step_x, n)
    count_b = _count_in(lo_b, hi_b, box.x_min, step_x, n)
    count_ab = _count_in(np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b), box.x_min, step_x, n)

    inter = float(count_ab.sum())
    union = float(count_a.sum() + count_b.sum()) - inter
    return inter / union if union > 0 else 0.0


def iou_matrix(detections: Sequence[Ellipse], ground_truths: Sequence[Ellipse]) -> np.ndarray:
    table = np.zeros((len(detections), len(ground_truths)))
    for i, det in enumerate(detections):
        for j, gt in enumerate(ground_truths):
            table[i, j] = iou_grid(det, gt).iou
    return table


def match_and_score(
    detections: Sequence[Ellipse],
    ground_truths: Sequence[Ellipse],
    min_iou: float = 0.0,
) -> MatchReport:
    """
    Greedy one-to-one matching by descending IoU. Pairs at or below
    min_iou stay unmatched.
    """
    if not 0.0 <= min_iou < 1.0:
        raise InvalidInputError("min_iou must lie in [0, 1)")
    table = iou_matrix(detections, ground_truths)
    candidates = sorted(
        (
            (-table[i, j], i, j)
            for i in range(table.shape[0])
            for j in range(table.shape[1])
            if table[i, j] > min_iou
        )
    )
    used_det, used_gt = set(), set()
    pairs: List[MatchPair] = []
    for neg_iou, i, j in candidates:
        if i in used_det or j in used_gt:
            continue
        used_det.add(i)
        used_gt.add(j)
        pairs.append(MatchPair(det=i, gt=j, iou=-neg_iou))

    total = sum(p.iou for p in pairs)
    denominator = max(len(detections), len(ground_truths))
    return MatchReport(
        pairs=pairs,
        unmatched_detections=[i for i in range(len(detections)) if i not in used_det],
        unmatched_ground_truths=[j for j in range(len(ground_truths)) if j not in used_gt],
        mean_iou_matched=total / len(pairs) if pairs else 0.0,
        mean_iou_penalized=total / denominator if denominator else 0.0,
    )


def _knot_ellipses(image: AnnotatedImage) -> List[Ellipse]:
    return [k.to_ellipse() for k in image.knots]


def evaluate_dataset(
    predictions: Sequence[AnnotatedImage],
    ground_truths: Sequence[AnnotatedImage],
    min_iou: float = 0.0,
    workers: int = 1,
) -> DatasetReport:
    """
    Per-image match_and_score keyed by image path, plus dataset-level means.
    Images missing from the predictions count as having no detections.
    """
    by_image: Dict[str, Tuple[List[Ellipse], List[Ellipse]]] = {}
    for gt in ground_truths:
        by_image.setdefault(gt.image_path, ([], []))[1].extend(_knot_ellipses(gt))
    for pred in predictions:
        by_image.setdefault(pred.image_path, ([], []))[0].extend(_knot_ellipses(pred))

    def score(item):
        name, (dets, gts) = item
        report = match_and_score(dets, gts, min_iou)
        logger.info(
            "%s: %d detections, %d ground truths, %d matched, penalized mean IoU %.4f",
            name, len(dets), len(gts), len(report.pairs), report.mean_iou_penalized,
        )
        return ImageReport(image=name, **report.model_dump())

    items = list(by_image.items())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(score, items))
    else:
        reports = [score(item) for item in items]

    matched = [p.iou for r in reports for p in r.pairs]
    denominator = sum(
        max(len(dets), len(gts)) for _, (dets, gts) in items
    )
    return DatasetReport(
        images=reports,
        matched_pairs=len(matched),
        mean_iou_matched=float(np.mean(matched)) if matched else 0.0,
        mean_iou_penalized=float(sum(matched) / denominator) if denominator else 0.0,
    )


def summarize_runs(values: Sequence[float]) -> RunSummary:
    """Mean and standard error of the mean over repeated runs."""
    runs = [float(v) for v in values]
    if not runs:
        return RunSummary(runs=[], mean=0.0, standard_error=0.0)
    mean = float(np.mean(runs))
    error = float(np.std(runs, ddof=1) / math.sqrt(len(runs))) if len(runs) > 1 else 0.0
    return RunSummary(runs=runs, mean=mean, standard_error=error)
