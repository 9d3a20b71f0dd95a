"""
Spectral projected gradient
Barzilai-Borwein steps with a nonmonotone line search, for smooth convex
objectives over sets with a cheap projection
"""
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from config import Config


@dataclass
class SpgResult:
    x: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool
    accepted: int = 0
    stalled: bool = False


def spg(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    x0,
    tol: float = None,
    max_iters: int = None,
    memory: int = 10,
    gamma: float = 1e-4,
    sigma1: float = 0.1,
    sigma2: float = 0.9,
    alpha_min: float = 1e-30,
    alpha_max: float = 1e30,
    stall_tol: float = None,
) -> SpgResult:
    """
    Minimize fun over the set behind `project`

    Stops when the projected-gradient residual ||P(x - g) - x||_inf drops
    below tol * max(1, ||x||_inf). Every accepted step satisfies
    f(x + lam d) <= max(last `memory` values) + gamma lam g'd.

    When the line search can no longer decrease f the iterate sits at the
    floating-point floor; that counts as converged if the residual is
    within stall_tol * max(1, ||x||_inf).

    Args:
        fun, grad: objective and its gradient, finite on the feasible set
        project: Euclidean projection onto the feasible set
        x0: starting point (projected first)
        tol: residual tolerance (default Config.SPG_TOLERANCE)
        max_iters: iteration cap (default Config.SPG_MAX_ITERS)
        stall_tol: residual accepted after a stall (default Config.SPG_STALL_TOLERANCE)

    Returns:
        SpgResult; converged is False when the cap was hit or a stall left a large residual
    """
    tol = Config.SPG_TOLERANCE if tol is None else tol
    max_iters = Config.SPG_MAX_ITERS if max_iters is None else max_iters
    stall_tol = Config.SPG_STALL_TOLERANCE if stall_tol is None else stall_tol

    def scale(y):
        return max(1.0, float(np.max(np.abs(y), initial=0.0)))

    x = project(np.asarray(x0, dtype=float))
    f = fun(x)
    g = grad(x)
    history = deque([f], maxlen=memory)

    residual = float(np.max(np.abs(project(x - g) - x), initial=0.0))
    alpha = 1.0 / residual if residual > 0 else 1.0
    alpha = min(alpha_max, max(alpha_min, alpha))

    accepted = 0
    for k in range(max_iters):
        if residual <= tol * scale(x):
            return SpgResult(x, f, residual, k, True, accepted)

        d = project(x - alpha * g) - x
        slope = float(g @ d)
        f_ref = max(history)
        lam = 1.0
        while True:
            x_new = x + lam * d
            f_new = fun(x_new)
            if f_new <= f_ref + gamma * lam * slope:
                break
            denominator = f_new - f - lam * slope
            lam_tmp = -0.5 * lam * lam * slope / denominator if denominator > 0 else 0.5 * lam
            lam = lam_tmp if sigma1 * lam <= lam_tmp <= sigma2 * lam else 0.5 * lam
            if lam < 1e-20:
                x_new = None
                break

        if x_new is None or not (x_new - x).any():
            converged = residual <= max(tol, stall_tol) * scale(x)
            return SpgResult(x, f, residual, k, converged, accepted, stalled=True)

        g_new = grad(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        alpha = min(alpha_max, max(alpha_min, float(s @ s) / sy)) if sy > 0 else alpha_max

        x, f, g = x_new, f_new, g_new
        history.append(f)
        accepted += 1
        residual = float(np.max(np.abs(project(x - g) - x), initial=0.0))

    return SpgResult(x, f, residual, max_iters, residual <= tol * scale(x), accepted)
