"""
Distances between Gaussian-parameterized ellipses.

The hot paths work on the three entries (a, b, d) of a symmetric 2x2 matrix
[[a, b], [b, d]] with plain floats; the public functions accept and return
the pydantic types.
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np

from schemas.ellipse import Ellipse, Gaussian2
from schemas.metrics import Gradient5, MetricKind, MetricValue
from utils.ellipse import covariance_entries, ellipse_to_gaussian, symmetric_eigen
from utils.errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

Sym = Tuple[float, float, float]

MAX_CONDITION = 1e12
EIGEN_FLOOR = 1e-12
FD_RELATIVE_STEP = 1e-5
DEGENERATE_RTOL = 1e-6


# ------------------------------------------------------------------------
# 2x2 symmetric kernels
# ------------------------------------------------------------------------
def _det(m: Sym) -> float:
    a, b, d = m
    return a * d - b * b


def _sqrt_entries(m: Sym) -> Sym:
    """S = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)) for 2x2 SPD M."""
    a, b, d = m
    root_det = math.sqrt(max(_det(m), 0.0))
    scale = math.sqrt(a + d + 2.0 * root_det)
    return (a + root_det) / scale, b / scale, (d + root_det) / scale


def _sandwich(s: Sym, m: Sym) -> Sym:
    """S M S for symmetric S and M, symmetrized."""
    p, q, r = s
    a, b, d = m
    x00, x01 = p * a + q * b, p * b + q * d
    x10, x11 = q * a + r * b, q * b + r * d
    off = 0.5 * ((x00 * q + x01 * r) + (x10 * p + x11 * q))
    return x00 * p + x01 * q, off, x10 * q + x11 * r


def _clamped(m: Sym) -> Sym:
    """Raise the smallest eigenvalue to EIGEN_FLOOR * trace when below it."""
    a, b, d = m
    lam_max, lam_min, angle = symmetric_eigen(a, b, d)
    floor = EIGEN_FLOOR * (a + d)
    if lam_min >= floor:
        return m
    bump = floor - lam_min
    vx, vy = -math.sin(angle), math.cos(angle)
    return a + bump * vx * vx, b + bump * vx * vy, d + bump * vy * vy


def _kl(mu_p, sp: Sym, mu_t, st: Sym) -> float:
    a, b, d = st
    lam_max, lam_min, _ = symmetric_eigen(a, b, d)
    if lam_min <= 0 or lam_max / lam_min > MAX_CONDITION:
        raise NumericalError(
            f"Target covariance is singular or ill-conditioned (eigenvalues {lam_max:.3g}, {lam_min:.3g})"
        )
    st = _clamped(st)
    sp = _clamped(sp)
    a, b, d = st
    det_t = _det(st)
    det_p = _det(sp)
    # inverse of the target covariance
    ia, ib, id_ = d / det_t, -b / det_t, a / det_t
    pa, pb, pd = sp
    trace_term = ia * pa + 2.0 * ib * pb + id_ * pd
    dx, dy = mu_p[0] - mu_t[0], mu_p[1] - mu_t[1]
    mahalanobis = ia * dx * dx + 2.0 * ib * dx * dy + id_ * dy * dy
    return 0.5 * (trace_term + mahalanobis + math.log(det_t / det_p) - 2.0)


def _w2_squared(mu_p, sp: Sym, mu_t, st: Sym) -> float:
    root_p = _sqrt_entries(sp)
    cross = _sqrt_entries(_sandwich(root_p, st))
    dx, dy = mu_p[0] - mu_t[0], mu_p[1] - mu_t[1]
    value = (
        dx * dx
        + dy * dy
        + (sp[0] + sp[2])
        + (st[0] + st[2])
        - 2.0 * (cross[0] + cross[2])
    )
    return max(value, 0.0)


def _as_sym(matrix) -> Sym:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (2, 2):
        raise InvalidInputError(f"Expected a 2x2 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("Matrix entries must be finite")
    scale = max(float(np.max(np.abs(m))), 1e-300)
    if abs(m[0, 1] - m[1, 0]) > 1e-9 * scale:
        raise InvalidInputError("Matrix must be symmetric")
    a, b, d = float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1])
    if a <= 0 or d <= 0 or a * d - b * b <= 0:
        raise InvalidInputError("Matrix must be positive definite")
    return a, b, d


def _gaussian_parts(g: Gaussian2):
    (a, b), (_, d) = g.sigma
    return g.mu, (a, b, d)


# ------------------------------------------------------------------------
# Public metrics
# ------------------------------------------------------------------------
def spd_sqrt(m) -> np.ndarray:
    """Principal square root of a 2x2 symmetric positive-definite matrix."""
    p, q, r = _sqrt_entries(_as_sym(m))
    return np.array([[p, q], [q, r]])


def kl_divergence(p: Gaussian2, t: Gaussian2) -> MetricValue:
    """KL(p || t) between two 2D Gaussians."""
    mu_p, sp = _gaussian_parts(p)
    mu_t, st = _gaussian_parts(t)
    return MetricValue(value=_kl(mu_p, sp, mu_t, st), kind=MetricKind.KL)


def wasserstein2_squared(p: Gaussian2, t: Gaussian2) -> MetricValue:
    mu_p, sp = _gaussian_parts(p)
    mu_t, st = _gaussian_parts(t)
    return MetricValue(value=_w2_squared(mu_p, sp, mu_t, st), kind=MetricKind.W2_SQUARED)


def wasserstein2(p: Gaussian2, t: Gaussian2) -> MetricValue:
    return MetricValue(value=math.sqrt(wasserstein2_squared(p, t).value), kind=MetricKind.W2)


def wasserstein2_commuting(p: Gaussian2, t: Gaussian2) -> float:
    """
    ||mu_p - mu_t||^2 + ||Sigma_p^1/2 - Sigma_t^1/2||_F^2.

    Equal to the general W2^2 only when the two covariances commute.
    """
    diff_mu = p.mean - t.mean
    diff_root = spd_sqrt(p.cov) - spd_sqrt(t.cov)
    return float(diff_mu @ diff_mu + np.sum(diff_root * diff_root))


_GAUSSIAN_METRICS = {
    MetricKind.KL: kl_divergence,
    MetricKind.W2_SQUARED: wasserstein2_squared,
    MetricKind.W2: wasserstein2,
}


def metric_between_gaussians(p: Gaussian2, t: Gaussian2, kind: MetricKind) -> MetricValue:
    return _GAUSSIAN_METRICS[MetricKind(kind)](p, t)


def metric_between_ellipses(a: Ellipse, b: Ellipse, kind: MetricKind) -> MetricValue:
    return metric_between_gaussians(ellipse_to_gaussian(a), ellipse_to_gaussian(b), kind)


# ------------------------------------------------------------------------
# Parameter-space evaluation (used by gradients and the fitter)
# ------------------------------------------------------------------------
def metric_from_params(pa: Sequence[float], pb: Sequence[float], kind: MetricKind) -> float:
    """
    Metric between two raw parameter vectors (cx, cy, rx, ry, theta).

    Theta is used as given (no normalization), so the value is smooth in
    every parameter.
    """
    kind = MetricKind(kind)
    sa = covariance_entries(pa[2], pa[3], pa[4])
    sb = covariance_entries(pb[2], pb[3], pb[4])
    mu_a, mu_b = (pa[0], pa[1]), (pb[0], pb[1])
    if kind is MetricKind.KL:
        return _kl(mu_a, sa, mu_b, sb)
    value = _w2_squared(mu_a, sa, mu_b, sb)
    return math.sqrt(value) if kind is MetricKind.W2 else value


def is_near_circular(rx: float, ry: float) -> bool:
    return abs(rx - ry) < DEGENERATE_RTOL * max(rx, ry)


def finite_difference_gradient(
    pa: Sequence[float], pb: Sequence[float], kind: MetricKind, step_scale: float = 1.0
) -> np.ndarray:
    """Central differences with relative step 1e-5 * max(|param|, 1) * step_scale."""
    x0 = np.asarray(pa, dtype=float)
    grad = np.zeros(5)
    for j in range(5):
        h = FD_RELATIVE_STEP * max(abs(x0[j]), 1.0) * step_scale
        if j in (2, 3):
            # keep both probes on the positive side of the semi-diameter
            h = min(h, 0.5 * x0[j])
        x = x0.copy()
        x[j] = x0[j] + h
        f_plus = metric_from_params(x, pb, kind)
        x[j] = x0[j] - h
        f_minus = metric_from_params(x, pb, kind)
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


def metric_gradient(
    a: Ellipse, b: Ellipse, kind: MetricKind, step_scale: float = 1.0
) -> Gradient5:
    """
    Gradient of metric_between_ellipses(a, b, kind) with respect to a's
    five parameters, by central finite differences.
    """
    grad = finite_difference_gradient(a.as_array(), b.as_array(), kind, step_scale)
    degenerate = is_near_circular(a.rx, a.ry)
    if degenerate:
        grad[4] = 0.0
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"Non-finite {MetricKind(kind).value} gradient at {a.as_array().tolist()}")
    return Gradient5.from_array(grad, degenerate=degenerate)


def analytic_w2_gradient(a: Ellipse, b: Ellipse) -> Gradient5:
    """
    Exact gradient of W2^2 with respect to a's parameters.

    Uses W2^2 = |dmu|^2 + tr A + tr B - 2 sqrt(tr(AB) + 2 sqrt(det A det B)),
    where A and B are the two covariances.
    """
    c, s = math.cos(a.theta), math.sin(a.theta)
    b00, b01, b11 = covariance_entries(b.rx, b.ry, b.theta)
    sa = covariance_entries(a.rx, a.ry, a.theta)
    root_det_b = b.rx * b.ry
    inner = sa[0] * b00 + 2.0 * sa[1] * b01 + sa[2] * b11 + 2.0 * a.rx * a.ry * root_det_b
    inv_root = 1.0 / math.sqrt(inner)

    d_tr_rx = 2.0 * a.rx * (c * c * b00 + 2.0 * c * s * b01 + s * s * b11)
    d_tr_ry = 2.0 * a.ry * (s * s * b00 - 2.0 * c * s * b01 + c * c * b11)
    spread = a.rx * a.rx - a.ry * a.ry
    d_tr_theta = spread * (-2.0 * c * s * b00 + 2.0 * (c * c - s * s) * b01 + 2.0 * c * s * b11)

    degenerate = is_near_circular(a.rx, a.ry)
    grad = [
        2.0 * (a.cx - b.cx),
        2.0 * (a.cy - b.cy),
        2.0 * a.rx - inv_root * (d_tr_rx + 2.0 * a.ry * root_det_b),
        2.0 * a.ry - inv_root * (d_tr_ry + 2.0 * a.rx * root_det_b),
        0.0 if degenerate else -inv_root * d_tr_theta,
    ]
    return Gradient5.from_array(grad, degenerate=degenerate)
