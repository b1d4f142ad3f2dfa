"""Closed-form planar flows used as reference solutions."""
from __future__ import annotations

import numpy as np


def point_vortex_velocity(x, x0, gamma: float = 1.0) -> np.ndarray:
    """Free-space velocity ``Γ/(2π) (x - x0)^⊥ / |x - x0|²``."""
    d = np.atleast_2d(x) - np.asarray(x0, dtype=float)
    r2 = np.sum(d * d, axis=1, keepdims=True)
    return gamma / (2 * np.pi) * np.stack([-d[:, 1], d[:, 0]], -1) / r2


def disk_point_vortex_velocity(x, x0, gamma: float = 1.0, R: float = 1.0) -> np.ndarray:
    """Point vortex in the disk of radius ``R``: the vortex plus an opposite image at ``R² x0 / |x0|²``."""
    x0 = np.asarray(x0, dtype=float)
    image = R * R * x0 / np.dot(x0, x0)
    return point_vortex_velocity(x, x0, gamma) - point_vortex_velocity(x, image, gamma)


def rankine_speed(r, a: float, omega: float = 1.0) -> np.ndarray:
    """Azimuthal speed of a uniform disk of vorticity ``omega`` and radius ``a``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        outside = omega * a * a / (2 * np.where(r > 0, r, 1.0))
    return np.where(r <= a, 0.5 * omega * r, outside)


def rankine_velocity(x, a: float, omega: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    d = np.atleast_2d(x) - np.asarray(center, dtype=float)
    r = np.linalg.norm(d, axis=1)
    sp = rankine_speed(r, a, omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.stack([-d[:, 1], d[:, 0]], -1) / np.where(r > 0, r, 1.0)[:, None]
    return sp[:, None] * e


def kirchhoff_rate(a: float, b: float, omega: float = 1.0) -> float:
    """Angular velocity of a uniform elliptical patch with semi-axes ``a``, ``b``."""
    return omega * a * b / (a + b) ** 2


def ellipse_interior_velocity(x, a: float, b: float, omega: float = 1.0) -> np.ndarray:
    """Velocity inside a uniform ellipse aligned with the axes."""
    x = np.atleast_2d(x)
    c = omega / (a + b)
    return np.stack([-c * a * x[:, 1], c * b * x[:, 0]], -1)
