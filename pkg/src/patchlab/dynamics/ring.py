"""Closed marker rings: containment, moments and arc-length reparametrisation."""
from __future__ import annotations

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .contour import polygon_area

REPARAM_EVERY = 20
REPARAM_RATIO = 3.0


@numba.njit(cache=True)
def _even_odd(px, py, vx, vy):
    out = np.zeros(px.shape[0], dtype=np.bool_)
    N = vx.shape[0]
    for p in range(px.shape[0]):
        x = px[p]
        y = py[p]
        inside = False
        j = N - 1
        for i in range(N):
            yi = vy[i]
            yj = vy[j]
            if (yi > y) != (yj > y):
                xc = vx[i] + (y - yi) * (vx[j] - vx[i]) / (yj - yi)
                if x < xc:
                    inside = not inside
            j = i
        out[p] = inside
    return out


def points_in_ring(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd containment test of ``points`` (P, 2) in the closed polygon ``ring``."""
    p = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
    r = np.ascontiguousarray(ring, dtype=float)
    return _even_odd(p[:, 0].copy(), p[:, 1].copy(), r[:, 0].copy(), r[:, 1].copy())


def ring_area(ring: np.ndarray) -> float:
    return polygon_area(ring)


def ring_moments(ring: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Area, centroid and central second-moment matrix of the polygon region."""
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    A = 0.5 * np.sum(c)
    cx = np.sum((x + xn) * c) / (6 * A)
    cy = np.sum((y + yn) * c) / (6 * A)
    Ixx = np.sum((y * y + y * yn + yn * yn) * c) / 12
    Iyy = np.sum((x * x + x * xn + xn * xn) * c) / 12
    Ixy = np.sum((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * c) / 24
    # second moments ∫ x², ∫ y², ∫ xy about the centroid
    Mxx = Iyy - A * cx * cx
    Myy = Ixx - A * cy * cy
    Mxy = Ixy - A * cx * cy
    return float(A), np.array([cx, cy]), np.array([[Mxx, Mxy], [Mxy, Myy]])


def principal_angle(ring: np.ndarray) -> float:
    """Orientation in (-π/2, π/2] of the major axis of the enclosed region."""
    _, _, M = ring_moments(ring)
    return 0.5 * float(np.arctan2(2 * M[0, 1], M[0, 0] - M[1, 1]))


def spacing_ratio(ring: np.ndarray) -> float:
    d = np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1)
    return float(d.max() / max(d.min(), 1e-300))


def reparametrize(ring: np.ndarray, m: int | None = None) -> np.ndarray:
    """Resample at equal arc length on the periodic cubic spline through the markers.

    The first marker is kept in place so the labelling stays stable.
    """
    m = m or len(ring)
    closed = np.vstack([ring, ring[:1]])
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    spl = CubicSpline(s, closed, bc_type="periodic", axis=0)
    # arc length of the spline itself, by fine quadrature
    fine = np.linspace(0.0, s[-1], 16 * m + 1)
    speed = np.linalg.norm(spl(fine, 1), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(fine))])
    target = np.linspace(0.0, arc[-1], m, endpoint=False)
    return spl(np.interp(target, arc, fine))


def ellipse_ring(center, semi_axes, m: int, angle: float = 0.0) -> np.ndarray:
    t = 2 * np.pi * np.arange(m) / m
    a, b = semi_axes
    p = np.stack([a * np.cos(t), b * np.sin(t)], -1)
    c, s = np.cos(angle), np.sin(angle)
    return p @ np.array([[c, s], [-s, c]]) + np.asarray(center, dtype=float)
