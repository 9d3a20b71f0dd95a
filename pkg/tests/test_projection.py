"""
Tests for the box-hyperplane projection and the spectral projected gradient
"""
from itertools import product

import numpy as np
import pytest

from problems.errors import InfeasibleError
from problems.projection import project_box_hyperplane
from problems.spg import spg


def brute_force_projection(y0, b, d, caps):
    """Enumerate which coordinates sit at 0, at their cap, or free; keep the closest feasible candidate"""
    n = y0.size
    best, best_dist = None, np.inf
    for pattern in product(range(3), repeat=n):
        y = np.zeros(n)
        free = np.array([s == 2 for s in pattern])
        for k, s in enumerate(pattern):
            if s == 1:
                y[k] = caps[k]
        rest = d - float(b[~free] @ y[~free])
        if free.any():
            bf = b[free]
            norm = float(bf @ bf)
            if norm == 0.0:
                if abs(rest) > 1e-12:
                    continue
                y[free] = y0[free]
            else:
                mu = (float(bf @ y0[free]) - rest) / norm
                y[free] = y0[free] - mu * bf
        elif abs(rest) > 1e-12:
            continue
        if np.any(y < -1e-12) or np.any(y > caps + 1e-12):
            continue
        dist = float(np.sum((y - y0) ** 2))
        if dist < best_dist:
            best, best_dist = y, dist
    return best


class TestProjection:
    def test_matches_brute_force(self):
        rng = np.random.Generator(np.random.PCG64(2024))
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            y0 = rng.normal(scale=3.0, size=n)
            b = rng.choice([-1.0, 1.0, 0.5, 2.0], size=n)
            caps = rng.uniform(0.5, 4.0, size=n)
            d = float(b @ rng.uniform(0.0, caps))
            y = project_box_hyperplane(y0, b, d, caps)
            expected = brute_force_projection(y0, b, d, caps)
            np.testing.assert_allclose(y, expected, atol=1e-8, rtol=0)

    def test_result_is_feasible(self):
        caps = np.array([2.0, 3.0, 1.0])
        y = project_box_hyperplane(np.array([5.0, -2.0, 1.0]), np.array([1.0, -1.0, 1.0]), 1.0, caps)
        assert float(np.array([1.0, -1.0, 1.0]) @ y) == pytest.approx(1.0, abs=1e-12)
        assert np.all(y >= 0) and np.all(y <= [2.0, 3.0, 1.0])

    def test_infinite_caps(self):
        y = project_box_hyperplane(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 4.0, np.inf)
        np.testing.assert_allclose(y, [2.0, 2.0])

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            project_box_hyperplane(np.zeros(2), np.array([1.0, 1.0]), 5.0, np.array([1.0, 1.0]))
        with pytest.raises(InfeasibleError):
            project_box_hyperplane(np.zeros(2), np.array([1.0, 1.0]), -1.0, np.array([1.0, 1.0]))

    def test_non_expansive(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for _ in range(500):
            n = int(rng.integers(1, 6))
            b = rng.choice([-1.0, 1.0, 0.5, 2.0], size=n)
            caps = rng.uniform(0.5, 4.0, size=n)
            d = float(b @ rng.uniform(0.0, caps))
            y0, y1 = rng.normal(scale=3.0, size=(2, n))
            gap = np.linalg.norm(project_box_hyperplane(y0, b, d, caps) - project_box_hyperplane(y1, b, d, caps))
            assert gap <= np.linalg.norm(y0 - y1) + 1e-9


class TestSpg:
    def test_distance_minimization_equals_projection(self):
        target = np.array([3.0, -1.0, 0.5, 2.0])
        b = np.array([1.0, -1.0, 1.0, -1.0])
        caps = np.array([1.5, 2.0, 2.0, 1.0])

        def project(y):
            return project_box_hyperplane(y, b, 0.5, caps)

        result = spg(
            lambda y: 0.5 * float(np.sum((y - target) ** 2)),
            lambda y: y - target,
            project,
            np.zeros(4),
        )
        assert result.converged
        np.testing.assert_allclose(result.x, project(target), atol=1e-8)

    def test_nonquadratic_objective(self):
        c = np.array([10.0, 20.0, 5.0])

        def fun(y):
            return float(np.sum(y / (c - y)))

        def grad(y):
            return c / (c - y) ** 2

        b = np.ones(3)
        caps = c * (1 - 1e-9)
        result = spg(fun, grad, lambda y: project_box_hyperplane(y, b, 6.0, caps), np.full(3, 2.0))
        assert result.converged
        assert float(b @ result.x) == pytest.approx(6.0, abs=1e-10)
        # equal marginal delay c / (c - y)^2 on every arc carrying flow
        marginal = grad(result.x)[result.x > 1e-9]
        assert np.ptp(marginal) < 1e-6

    def test_iteration_cap(self):
        result = spg(
            lambda y: float(np.sum(y ** 4)),
            lambda y: 4 * y ** 3,
            lambda y: y,
            np.full(3, 5.0),
            tol=0.0,
            max_iters=3,
        )
        assert not result.converged
        assert result.iterations == 3

    def test_stall_at_the_floating_point_floor_counts_as_converged(self):
        # a flat objective with a tiny gradient leaves the line search nothing to gain
        result = spg(
            lambda y: 0.0,
            lambda y: np.full(2, 1e-8),
            lambda y: np.clip(y, 0.0, 1.0),
            np.full(2, 0.5),
        )
        assert result.stalled
        assert result.converged
        assert result.residual == pytest.approx(1e-8)
        np.testing.assert_allclose(result.x, [0.5, 0.5])

    def test_stall_with_a_large_residual_is_not_converged(self):
        result = spg(
            lambda y: 0.0,
            lambda y: np.full(2, 1e-3),
            lambda y: np.clip(y, 0.0, 1.0),
            np.full(2, 0.5),
        )
        assert result.stalled
        assert not result.converged

    def test_tolerance_scales_with_the_iterate(self):
        # residual 5e-10 passes against 1e-10 * ||x||_inf = 1e-9
        result = spg(
            lambda y: 0.0,
            lambda y: np.full(1, 5e-10),
            lambda y: y,
            np.array([10.0]),
            tol=1e-10,
        )
        assert result.converged
        assert not result.stalled
        assert result.iterations == 0
