"""
Projection onto {y : b'y = d, 0 <= y <= caps}
"""
import numpy as np

from problems.errors import InfeasibleError


def _clipped(y0, b, mu, caps):
    return np.clip(y0 - mu * b, 0.0, caps)


def project_box_hyperplane(y0, b, d: float, caps, tol: float = 1e-12) -> np.ndarray:
    """
    Euclidean projection of y0 onto a box intersected with a hyperplane

    The projection is y(mu) = clip(y0 - mu b, 0, caps) for the multiplier
    mu solving h(mu) = b'y(mu) - d = 0. h is piecewise linear and
    nonincreasing, so mu is found exactly between two sorted breakpoints;
    bisection refines it if round-off leaves a residual above tol.

    Args:
        y0: point to project
        b: hyperplane normal
        d: hyperplane offset
        caps: upper bounds (entries may be inf)
        tol: accepted constraint residual

    Returns:
        Projected point
    """
    y0 = np.asarray(y0, dtype=float)
    b = np.asarray(b, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), y0.shape)

    scale = max(1.0, abs(d), float(np.max(np.abs(b) * np.where(np.isfinite(caps), caps, 0.0), initial=0.0)))
    upper = float(np.sum(np.where(b > 0, b * caps, 0.0)))
    lower = float(np.sum(np.where(b < 0, b * caps, 0.0)))
    if d > upper + tol * scale or d < lower - tol * scale:
        raise InfeasibleError(f"hyperplane b'y = {d:g} misses the box (reachable [{lower:g}, {upper:g}])")

    def h(mu):
        return float(b @ _clipped(y0, b, mu, caps)) - d

    active = b != 0
    if not np.any(active):
        return np.clip(y0, 0.0, caps)

    points = np.concatenate((y0[active] / b[active], (y0[active] - caps[active]) / b[active]))
    points = np.unique(points[np.isfinite(points)])
    values = np.array([h(mu) for mu in points])

    # h is nonincreasing: find the first breakpoint where it drops to zero or below
    idx = int(np.searchsorted(-values, 0.0, side="left"))
    if idx < len(points) and values[idx] == 0.0:
        return _clipped(y0, b, points[idx], caps)
    if idx == 0:
        lo, hi = points[0] - 1.0, points[0]
        for _ in range(64):
            if h(lo) >= 0:
                break
            lo = points[0] - 2.0 * (points[0] - lo)
    elif idx == len(points):
        lo, hi = points[-1], points[-1] + 1.0
        for _ in range(64):
            if h(hi) <= 0:
                break
            hi = points[-1] + 2.0 * (hi - points[-1])
    else:
        lo, hi = points[idx - 1], points[idx]

    h_lo, h_hi = h(lo), h(hi)
    mu = lo if h_lo == h_hi else lo + (hi - lo) * h_lo / (h_lo - h_hi)
    y = _clipped(y0, b, mu, caps)
    if abs(float(b @ y) - d) <= tol * scale:
        return y

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
        y = _clipped(y0, b, 0.5 * (lo + hi), caps)
        if abs(float(b @ y) - d) <= tol * scale or hi - lo <= 1e-16 * max(1.0, abs(lo)):
            break
    return y
