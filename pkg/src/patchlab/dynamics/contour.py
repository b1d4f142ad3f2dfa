"""Exact velocity of a uniform polygonal vortex patch in the plane.

For vorticity ``ω₀`` on a region bounded by a counter-clockwise polygon the
free-space velocity is ``v(x) = -(ω₀/2π) ∮ log|x - y| dy``. Each straight
segment is integrated in closed form, so the only discretisation error is
the polygonal approximation of the curve.
"""
from __future__ import annotations

import numba
import numpy as np

_TWO_PI = 2.0 * np.pi


@numba.njit(cache=True, fastmath=True)
def _kernel(tx, ty, vx, vy, want_grad):
    P = tx.shape[0]
    N = vx.shape[0]
    vel = np.zeros((P, 2))
    grad = np.zeros((P, 2, 2))
    seg_L = np.empty(N)
    seg_t0 = np.empty(N)
    seg_t1 = np.empty(N)
    for k in range(N):
        kn = k + 1 if k + 1 < N else 0
        dx = vx[kn] - vx[k]
        dy = vy[kn] - vy[k]
        L = np.sqrt(dx * dx + dy * dy)
        seg_L[k] = L
        seg_t0[k] = dx / L if L > 0.0 else 0.0
        seg_t1[k] = dy / L if L > 0.0 else 0.0
    for p in range(P):
        x0 = tx[p]
        x1 = ty[p]
        s0 = 0.0
        s1 = 0.0
        g00 = 0.0
        g01 = 0.0
        g10 = 0.0
        g11 = 0.0
        # squared distance and its log at the first vertex; each later
        # vertex is shared by two segments so its log is computed once
        ex = x0 - vx[0]
        ey = x1 - vy[0]
        r_first = ex * ex + ey * ey
        l_first = np.log(r_first) if r_first > 0.0 else 0.0
        r0 = r_first
        l0 = l_first
        for k in range(N):
            if k + 1 < N:
                fx = x0 - vx[k + 1]
                fy = x1 - vy[k + 1]
                r1 = fx * fx + fy * fy
                l1 = np.log(r1) if r1 > 0.0 else 0.0
            else:
                r1 = r_first
                l1 = l_first
            L = seg_L[k]
            if L > 0.0:
                t0 = seg_t0[k]
                t1 = seg_t1[k]
                rx = x0 - vx[k]
                ry = x1 - vy[k]
                u = rx * t0 + ry * t1
                q = -rx * t1 + ry * t0
                # signed angle subtended by the segment
                th = np.arctan2(L * q, r0 - L * u)
                # ∫_0^L log|x - a - s t| ds
                I = 0.5 * ((L - u) * l1 + u * l0) - L + q * th
                s0 += I * t0
                s1 += I * t1
                if want_grad:
                    lg = 0.0
                    if r0 > 0.0 and r1 > 0.0:
                        lg = -0.5 * (l1 - l0)
                    # ∇I = lg t + th n with n = (-t1, t0)
                    gx = lg * t0 - th * t1
                    gy = lg * t1 + th * t0
                    g00 += t0 * gx
                    g01 += t0 * gy
                    g10 += t1 * gx
                    g11 += t1 * gy
            r0 = r1
            l0 = l1
        vel[p, 0] = s0
        vel[p, 1] = s1
        grad[p, 0, 0] = g00
        grad[p, 0, 1] = g01
        grad[p, 1, 0] = g10
        grad[p, 1, 1] = g11
    return vel, grad


def _prep(targets, vertices):
    x = np.ascontiguousarray(np.atleast_2d(targets), dtype=float)
    y = np.ascontiguousarray(vertices, dtype=float)
    return x[:, 0].copy(), x[:, 1].copy(), y[:, 0].copy(), y[:, 1].copy()


def contour_velocity(targets, vertices, omega: float = 1.0) -> np.ndarray:
    """Velocity ``(P, 2)`` at ``targets`` induced by vorticity ``omega`` inside the polygon."""
    vel, _ = _kernel(*_prep(targets, vertices), False)
    return -omega / _TWO_PI * vel


def contour_velocity_gradient(targets, vertices, omega: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and ``∂_j v_i`` (shape ``(P, 2, 2)``).

    The gradient jumps across the polygon and has a logarithmic singularity
    at its vertices; it is meant for targets off the contour.
    """
    vel, grad = _kernel(*_prep(targets, vertices), True)
    c = -omega / _TWO_PI
    return c * vel, c * grad


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
