"""
Exact conversions between ellipses and 2D Gaussians, plus derived geometry.

An ellipse with centre c, major/minor semi-diameters (sl, ss) and rotation theta
is the unit Mahalanobis contour of N(c, R(theta)^T diag(sl^2, ss^2) R(theta)).
"""
import math
from typing import Tuple

import numpy as np
from pydantic import ValidationError

from schemas.ellipse import AxisBox, Ellipse, Gaussian2
from utils.angles import normalize_angle
from utils.errors import InvalidInputError

# Relative eigenvalue gap below which the eigenspace is treated as isotropic.
DEGENERACY_RTOL = 1e-9


def make_ellipse(cx: float, cy: float, rx: float, ry: float, theta: float = 0.0) -> Ellipse:
    """Build an Ellipse, reporting invariant violations as InvalidInputError."""
    try:
        return Ellipse(cx=cx, cy=cy, rx=rx, ry=ry, theta=theta)
    except ValidationError as exc:
        raise InvalidInputError(f"Invalid ellipse: {exc.errors()[0]['msg']}") from exc


def rotation_matrix(theta: float) -> np.ndarray:
    if not math.isfinite(theta):
        raise InvalidInputError("Rotation angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def canonicalize(rx: float, ry: float, theta: float) -> Tuple[float, float, float]:
    """Return (major, minor, angle) with the angle of the major axis normalized."""
    if rx >= ry:
        return rx, ry, normalize_angle(theta)
    return ry, rx, normalize_angle(theta + math.pi / 2)


def covariance_entries(rx: float, ry: float, theta: float) -> Tuple[float, float, float]:
    """
    Entries (a, b, d) of the symmetric covariance [[a, b], [b, d]].

    R^T diag(rx^2, ry^2) R is invariant under the axis swap used by
    canonicalize, so the raw annotation parameters can be used directly.
    """
    c, s = math.cos(theta), math.sin(theta)
    l, m = rx * rx, ry * ry
    return l * c * c + m * s * s, (l - m) * c * s, l * s * s + m * c * c


def ellipse_to_gaussian(e: Ellipse) -> Gaussian2:
    major, minor, angle = canonicalize(e.rx, e.ry, e.theta)
    r = rotation_matrix(angle)
    sigma = r.T @ np.diag([major * major, minor * minor]) @ r
    # exact symmetry; the product can differ in the last ulp off the diagonal
    off = 0.5 * (sigma[0, 1] + sigma[1, 0])
    sigma[0, 1] = sigma[1, 0] = off
    return Gaussian2.from_arrays((e.cx, e.cy), sigma)


def symmetric_eigen(a: float, b: float, d: float) -> Tuple[float, float, float]:
    """
    Closed-form eigen-decomposition of [[a, b], [b, d]].

    Returns (largest eigenvalue, smallest eigenvalue, angle of the major
    eigenvector in (-pi/2, pi/2]).
    """
    half_trace = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    lam_max = half_trace + radius
    # det / lam_max instead of half_trace - radius, which cancels on thin ellipses;
    # rotated ones keep a relative error near eps * lam_max / lam_min from the entries
    lam_min = max(a * d - b * b, 0.0) / lam_max if lam_max > 0 else 0.0
    angle = 0.5 * math.atan2(2.0 * (b + 0.0), a - d)
    return lam_max, lam_min, angle


def gaussian_to_ellipse(g: Gaussian2) -> Ellipse:
    (a, b), (_, d) = g.sigma
    lam_max, lam_min, angle = symmetric_eigen(a, b, d)
    if lam_min <= 0:
        raise InvalidInputError("Covariance is not positive definite")
    if lam_max - lam_min <= DEGENERACY_RTOL * lam_max:
        radius = math.sqrt(0.5 * (lam_max + lam_min))
        return make_ellipse(g.mu[0], g.mu[1], radius, radius, 0.0)
    return make_ellipse(
        g.mu[0], g.mu[1], math.sqrt(lam_max), math.sqrt(lam_min), normalize_angle(angle)
    )


def half_extents(e: Ellipse) -> Tuple[float, float]:
    c, s = math.cos(e.theta), math.sin(e.theta)
    hx = math.sqrt((e.rx * c) ** 2 + (e.ry * s) ** 2)
    hy = math.sqrt((e.rx * s) ** 2 + (e.ry * c) ** 2)
    return hx, hy


def ellipse_bbox(e: Ellipse) -> AxisBox:
    """Tightest axis-aligned box around the ellipse."""
    hx, hy = half_extents(e)
    return AxisBox(x_min=e.cx - hx, y_min=e.cy - hy, x_max=e.cx + hx, y_max=e.cy + hy)


def quadratic_form(e: Ellipse, xs, ys) -> np.ndarray:
    """(x - mu)^T Sigma^-1 (x - mu), evaluated in the ellipse's own frame."""
    c, s = math.cos(e.theta), math.sin(e.theta)
    dx = np.asarray(xs, dtype=float) - e.cx
    dy = np.asarray(ys, dtype=float) - e.cy
    u = (c * dx + s * dy) / e.rx
    v = (-s * dx + c * dy) / e.ry
    return u * u + v * v


def contains(e: Ellipse, point) -> bool:
    x, y = point
    return bool(quadratic_form(e, x, y) <= 1.0 + 1e-12)


def contains_points(e: Ellipse, xs, ys) -> np.ndarray:
    """Vectorized interior test over broadcastable coordinate arrays."""
    return quadratic_form(e, xs, ys) <= 1.0 + 1e-12


def boundary_points(e: Ellipse, count: int = 720) -> np.ndarray:
    """`count` points on the ellipse outline, shape (count, 2)."""
    t = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    c, s = math.cos(e.theta), math.sin(e.theta)
    u = e.rx * np.cos(t)
    v = e.ry * np.sin(t)
    return np.column_stack((e.cx + c * u - s * v, e.cy + s * u + c * v))


def transform_ellipse(e: Ellipse, angle: float = 0.0, pivot=(0.0, 0.0), offset=(0.0, 0.0)) -> Ellipse:
    """Rotate `e` by `angle` about `pivot`, then translate by `offset`."""
    c, s = math.cos(angle), math.sin(angle)
    px, py = pivot
    dx, dy = e.cx - px, e.cy - py
    return make_ellipse(
        px + c * dx - s * dy + offset[0],
        py + s * dx + c * dy + offset[1],
        e.rx,
        e.ry,
        e.theta + angle,
    )
