"""
Local problems
The per-node subproblem contract and the quadratic problems used by MPC and the tests
"""
from typing import Dict, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError, solve

from engine.state import EngineError, LocalSolverError, free_positions


class LocalProblem(Protocol):
    """f_p exposed through its proximal-style step.

    solve returns argmin f_p(x) + sum_l v_l'x_l + 1/2 sum_l weights_l ||x_l||^2
    over the components in `domain`, each returned as a 1-D array.
    """

    node: int
    domain: Tuple[int, ...]

    def solve(
        self,
        v: Dict[int, np.ndarray],
        weights: Dict[int, float],
        x0: Optional[Dict[int, np.ndarray]] = None,
    ) -> Dict[int, np.ndarray]:
        ...


class QuadraticLocalProblem:
    """f(x) = x'Ex + w'x + constant over the stacked components of `domain`"""

    def __init__(self, node: int, domain, sizes: Sequence[int], E, w, constant: float = 0.0):
        self.node = node
        self.domain = tuple(domain)
        self.sizes = {l: int(sizes[l]) for l in self.domain}
        dim = sum(self.sizes.values())
        self.E = np.asarray(E, dtype=float).reshape(dim, dim)
        self.w = np.asarray(w, dtype=float).reshape(dim)
        self.constant = float(constant)
        if not np.allclose(self.E, self.E.T, atol=1e-12 * max(1.0, np.abs(self.E).max(initial=0.0))):
            raise EngineError(f"quadratic form at node {node} is not symmetric")
        self._factors = {}

        self.slots = {}
        start = 0
        for l in self.domain:
            self.slots[l] = slice(start, start + self.sizes[l])
            start += self.sizes[l]

    def stack(self, parts: Dict[int, np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(parts[l], dtype=float).reshape(self.sizes[l]) for l in self.domain])

    def split(self, x: np.ndarray) -> Dict[int, np.ndarray]:
        return {l: x[s].copy() for l, s in self.slots.items()}

    def value(self, x: np.ndarray) -> float:
        return float(x @ self.E @ x + self.w @ x + self.constant)

    def quadratic_form(self):
        return self.E, self.w

    def _factor(self, weights: Dict[int, float]):
        key = tuple(float(weights.get(l, 0.0)) for l in self.domain)
        if key not in self._factors:
            diag = np.concatenate([np.full(self.sizes[l], k) for l, k in zip(self.domain, key)])
            try:
                self._factors[key] = cho_factor(2.0 * self.E + np.diag(diag))
            except LinAlgError:
                raise LocalSolverError("subproblem is not strongly convex", node=self.node)
        return self._factors[key]

    def solve(self, v, weights, x0=None):
        rhs = -(self.w + self.stack(v))
        x = cho_solve(self._factor(weights), rhs)
        return self.split(x)


def local_solve(
    problem: Optional[LocalProblem],
    slots: Dict[int, slice],
    v: np.ndarray,
    weights: np.ndarray,
    x0: Optional[np.ndarray] = None,
    node: Optional[int] = None,
    free: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Update all copies of one node

    Components the node's function does not depend on (Steiner copies, or
    components outside f_p in global-variable mode) have the closed form
    x_l = -v_l / weights_l, applied to the whole block at once; the rest go
    to the problem's own solver.

    Args:
        problem: the node's local problem, or None when f_p is identically zero
        slots: position of every component in the node's flat copy vector
        v: linear term, flat over the node's copies
        weights: rho * D_{p,l}, repeated over each component's entries
        x0: current copies, used as a warm start by iterative solvers
        node: node id for error messages
        free: precomputed free_positions(problem, slots)

    Returns:
        New flat copy vector
    """
    v = np.asarray(v, dtype=float)
    weights = np.asarray(weights, dtype=float)
    free = free_positions(problem, slots) if free is None else free
    result = np.empty_like(v)

    if free.size:
        w = weights[free]
        if np.any(w <= 0):
            bad = int(free[np.argmax(w <= 0)])
            l = next(l for l, s in slots.items() if s.start <= bad < s.stop)
            raise LocalSolverError(f"component {l} has no neighbors and no cost", node=node)
        result[free] = -v[free] / w

    if problem is not None and problem.domain:
        own = problem.solve(
            {l: v[slots[l]] for l in problem.domain},
            {l: float(weights[slots[l].start]) for l in problem.domain},
            None if x0 is None else {l: x0[slots[l]].copy() for l in problem.domain},
        )
        for l in problem.domain:
            s = slots[l]
            xl = np.asarray(own[l], dtype=float).reshape(s.stop - s.start)
            if not np.all(np.isfinite(xl)):
                raise LocalSolverError(f"non-finite solution for component {l}", node=node)
            result[s] = xl
    return result


def assemble_quadratic(problems: Sequence[QuadraticLocalProblem], sizes: Sequence[int]):
    """Hessian H and linear term g of sum_p f_p over the full variable, gradient H x + g"""
    offsets = np.concatenate(([0], np.cumsum(sizes))).astype(int)
    n = int(offsets[-1])
    H = np.zeros((n, n))
    g = np.zeros(n)
    for problem in problems:
        if problem is None:
            continue
        idx = np.concatenate([np.arange(offsets[l], offsets[l + 1]) for l in problem.domain])
        H[np.ix_(idx, idx)] += 2.0 * problem.E
        g[idx] += problem.w
    return H, g


def centralized_quadratic(problems: Sequence[QuadraticLocalProblem], sizes: Sequence[int]) -> np.ndarray:
    """Minimizer of sum_p f_p over the full variable for quadratic f_p"""
    H, g = assemble_quadratic(problems, sizes)
    try:
        return solve(H, -g, assume_a="sym")
    except LinAlgError as e:
        raise EngineError(f"centralized quadratic is singular: {e}")
