"""
Gradient-descent fitting of a 5-parameter ellipse to a target under the
distance metrics, and the three-part detection loss.
"""
import logging
import math
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from schemas.ellipse import Ellipse
from schemas.fit import BasinReport, FitConfig, FitMetric, FitTrace, LossWeights, MetricBasinStats
from schemas.metrics import MetricKind
from utils.angles import normalize_angle, wrap_difference
from utils.ellipse import make_ellipse
from utils.errors import DivergenceError, InvalidInputError
from utils.iou import iou_grid
from utils.metrics import finite_difference_gradient, metric_between_ellipses, metric_from_params

logger = logging.getLogger(__name__)

DIVERGENCE_LOSS = 1e12
MIN_STEP = 1e-12
PROB_EPS = 1e-12

_METRIC_KINDS = {FitMetric.KL: MetricKind.KL, FitMetric.W2_SQUARED: MetricKind.W2_SQUARED}


# ------------------------------------------------------------------------
# Losses
# ------------------------------------------------------------------------
def _l2_params(pa: Sequence[float], pb: Sequence[float]) -> float:
    linear = sum((pa[j] - pb[j]) ** 2 for j in range(4))
    return linear + wrap_difference(pa[4] - pb[4]) ** 2


def l2_param_loss(a: Ellipse, b: Ellipse) -> float:
    """Squared parameter distance; the angle difference is taken modulo pi."""
    return _l2_params(a.as_array(), b.as_array())


def _loss_fn(metric: FitMetric, target: np.ndarray) -> Callable[[np.ndarray], float]:
    if metric is FitMetric.L2_PARAMS:
        return lambda x: _l2_params(x, target)
    kind = _METRIC_KINDS[metric]

    def loss(x: np.ndarray) -> float:
        if x[2] <= 0 or x[3] <= 0:
            return math.inf
        return metric_from_params(x, target, kind)

    return loss


def _grad_fn(metric: FitMetric, target: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    if metric is FitMetric.L2_PARAMS:
        def grad(x: np.ndarray) -> np.ndarray:
            g = 2.0 * (x - target)
            g[4] = 2.0 * wrap_difference(x[4] - target[4])
            return g
        return grad
    kind = _METRIC_KINDS[metric]
    return lambda x: finite_difference_gradient(x, target, kind)


def composite_loss(
    proposal: Ellipse,
    refined: Ellipse,
    target: Ellipse,
    class_prob: float,
    is_object: bool,
    w: Optional[LossWeights] = None,
) -> float:
    """
    w_proposal * KL(proposal, target) + w_regression * W2^2(refined, target)
    + w_classification * binary cross entropy.
    """
    w = w or LossWeights()
    weights = (w.w_proposal, w.w_regression, w.w_classification)
    if not all(math.isfinite(v) for v in weights):
        raise InvalidInputError("Loss weights must be finite")
    prob = min(max(float(class_prob), PROB_EPS), 1.0 - PROB_EPS)
    y = 1.0 if is_object else 0.0
    cross_entropy = -(y * math.log(prob) + (1.0 - y) * math.log(1.0 - prob))
    proposal_loss = metric_between_ellipses(proposal, target, MetricKind.KL).value
    regression_loss = metric_between_ellipses(refined, target, MetricKind.W2_SQUARED).value
    return w.w_proposal * proposal_loss + w.w_regression * regression_loss + w.w_classification * cross_entropy


# ------------------------------------------------------------------------
# Descent
# ------------------------------------------------------------------------
def _preconditioner(metric: FitMetric, init: Ellipse) -> np.ndarray:
    """
    Distribution metrics are descended with lengths measured in units of the
    initial ellipse's mean semi-diameter; the parameter-space L2 loss in pixels.
    """
    if metric is FitMetric.L2_PARAMS:
        return np.ones(5)
    scale_sq = init.rx * init.ry
    return np.array([scale_sq, scale_sq, scale_sq, scale_sq, 1.0])


def fit_ellipse(init: Ellipse, target: Ellipse, cfg: Optional[FitConfig] = None) -> FitTrace:
    """
    Gradient descent with backtracking (halving until the loss decreases)
    from `init` towards `target` under cfg.metric.
    """
    cfg = cfg or FitConfig()
    metric = FitMetric(cfg.metric)
    t = target.as_array()
    loss_of = _loss_fn(metric, t)
    grad_of = _grad_fn(metric, t)
    scale = _preconditioner(metric, init)

    x = init.as_array()
    loss = loss_of(x)
    if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
        raise DivergenceError(metric.value, 0, loss)

    history = [loss]
    step = cfg.step_size
    iterations = 0
    converged = False
    for iteration in range(1, cfg.max_iters + 1):
        grad = grad_of(x)
        if float(np.max(np.abs(grad))) < cfg.grad_tolerance:
            converged = True
            break

        direction = scale * grad
        accepted = False
        while step >= MIN_STEP:
            trial = x - step * direction
            trial[4] = normalize_angle(trial[4])
            trial_loss = loss_of(trial)
            if trial_loss < loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            log = logger.debug if loss < 1e-10 else logger.warning
            log("%s fit stalled at iteration %d (loss=%.3g)", metric.value, iteration, loss)
            break

        x, loss = trial, trial_loss
        history.append(loss)
        iterations = iteration
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError(metric.value, iteration, loss)
        step = min(step * 2.0, cfg.step_size)

    final = make_ellipse(*x)
    logger.debug("%s fit: %d iterations, loss %.3g, converged=%s", metric.value, iterations, loss, converged)
    return FitTrace(
        metric=metric,
        iterations=iterations,
        final_params=final,
        final_loss=loss,
        loss_history=history,
        converged=converged,
    )


# ------------------------------------------------------------------------
# Basin comparison
# ------------------------------------------------------------------------
def random_target(rng: np.random.Generator) -> Ellipse:
    rx = rng.uniform(15.0, 40.0)
    ry = rng.uniform(8.0, 0.8 * rx)
    return make_ellipse(
        rng.uniform(60.0, 140.0), rng.uniform(60.0, 140.0), rx, ry, rng.uniform(-math.pi / 2, math.pi / 2)
    )


def perturb(target: Ellipse, rng: np.random.Generator) -> Ellipse:
    """±10 px centre, axes scaled by [0.67, 1.5], ±0.3 rad."""
    return make_ellipse(
        target.cx + rng.uniform(-10.0, 10.0),
        target.cy + rng.uniform(-10.0, 10.0),
        target.rx * rng.uniform(0.67, 1.5),
        target.ry * rng.uniform(0.67, 1.5),
        target.theta + rng.uniform(-0.3, 0.3),
    )


def basin_pairs(count: int, seed: int) -> list[Tuple[Ellipse, Ellipse]]:
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        target = random_target(rng)
        pairs.append((target, perturb(target, rng)))
    return pairs


def basin_report(
    pairs: Iterable[Tuple[Ellipse, Ellipse]],
    metrics: Sequence[FitMetric] = (FitMetric.W2_SQUARED, FitMetric.KL),
    cfg: Optional[FitConfig] = None,
) -> BasinReport:
    """Fit every (target, init) pair under each metric and tabulate the outcomes."""
    cfg = cfg or FitConfig()
    pairs = list(pairs)
    stats = {}
    for metric in metrics:
        run_cfg = cfg.model_copy(update={"metric": metric})
        ious, iteration_counts = [], []
        entry = MetricBasinStats(runs=len(pairs))
        for target, init in pairs:
            try:
                trace = fit_ellipse(init, target, run_cfg)
            except DivergenceError as exc:
                logger.info("%s", exc.message)
                entry.diverged += 1
                continue
            iou = iou_grid(trace.final_params, target).iou
            entry.converged += int(trace.converged)
            entry.iou_above_099 += int(iou > 0.99)
            ious.append(iou)
            iteration_counts.append(trace.iterations)
        entry.mean_final_iou = float(np.mean(ious)) if ious else 0.0
        entry.mean_iterations = float(np.mean(iteration_counts)) if iteration_counts else 0.0
        stats[metric] = entry
        logger.info(
            "%s: %d/%d above IoU 0.99, %d diverged, mean IoU %.4f",
            metric.value, entry.iou_above_099, entry.runs, entry.diverged, entry.mean_final_iou,
        )
    return BasinReport(metrics=stats)
