"""
Explicit Extended ADMM
Materializes the copy-consensus constraints and runs the C-block method
directly, for checking the distributed algorithms on small instances
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import solve, LinAlgError

from config import Config
from engine.state import CopyLayout, EngineConfig, EngineError, ReferenceUnsupportedError
from graph.coloring import Coloring
from graph.components import ComponentMap
from graph.network import Network
from utils.logger import logger


@dataclass
class ReferenceTrace:
    """Copies and per-edge multipliers after every iteration.

    rows[r] = (l, i, j, s): constraint x_l^{(i)}[s] - x_l^{(j)}[s] = 0 with i < j.
    copies[k-1] is the flat vector of all copies after iteration k, in the
    same order as CopyState.flat().
    """

    layout: CopyLayout
    coloring: Coloring
    A: np.ndarray
    rows: List[Tuple[int, int, int, int]]
    copies: List[np.ndarray] = field(default_factory=list)
    duals: List[np.ndarray] = field(default_factory=list)

    def _column(self, p: int, l: int) -> np.ndarray:
        s = self.layout.slots[p][l]
        return self.layout.bases[p] + np.arange(s.start, s.stop)

    def copy(self, k: int, p: int, l: int) -> np.ndarray:
        return self.copies[k - 1][self._column(p, l)]

    def edge_dual(self, k: int, l: int, i: int, j: int) -> np.ndarray:
        """lambda_l^{ij} after iteration k; antisymmetric in (i, j)"""
        lo, hi = min(i, j), max(i, j)
        idx = [r for r, (rl, ri, rj, _) in enumerate(self.rows) if (rl, ri, rj) == (l, lo, hi)]
        if not idx:
            raise EngineError(f"({i}, {j}) is not a consensus edge of component {l}")
        values = self.duals[k - 1][idx]
        return values if i < j else -values

    def condensed_dual(self, k: int, p: int, l: int) -> np.ndarray:
        """sum_j sign(j - p) lambda_l^{min(p,j) max(p,j)} over the consensus neighbors of p"""
        total = np.zeros(self.layout.cmap.sizes[l])
        for r, (rl, i, j, s) in enumerate(self.rows):
            if rl != l:
                continue
            if i == p:
                total[s] += self.duals[k - 1][r]
            elif j == p:
                total[s] -= self.duals[k - 1][r]
        return total

    def gram_blocks(self) -> Dict[Tuple[int, int], np.ndarray]:
        """(A_l^c)'A_l^c for every component with consensus edges and every color"""
        blocks = {}
        rows_of: Dict[int, List[int]] = {}
        for r, (l, _, _, _) in enumerate(self.rows):
            rows_of.setdefault(l, []).append(r)
        for l, rows in rows_of.items():
            for c, members in enumerate(self.coloring.color_classes):
                holders = [p for p in members if l in self.layout.slots[p]]
                if not holders:
                    continue
                cols = np.concatenate([self._column(p, l) for p in holders])
                block = self.A[np.ix_(rows, cols)]
                blocks[(l, c)] = block.T @ block
        return blocks


def _constraint_matrix(layout: CopyLayout):
    rows = []
    for p in range(layout.net.node_count):
        for link in layout.links[p]:
            j = link.neighbor
            if j < p:
                continue
            for l in link.components:
                s = layout.slots[p][l]
                rows.extend((l, p, j, k) for k in range(s.stop - s.start))
    rows.sort()

    A = np.zeros((len(rows), layout.total_dim))
    for r, (l, i, j, k) in enumerate(rows):
        A[r, layout.bases[i] + layout.slots[i][l].start + k] = 1.0
        A[r, layout.bases[j] + layout.slots[j][l].start + k] = -1.0
    return A, rows


def _cost(layout: CopyLayout):
    """Block-diagonal 2E and stacked w over all copies"""
    n = layout.total_dim
    H = np.zeros((n, n))
    g = np.zeros(n)
    for p, problem in enumerate(layout.problems):
        if problem is None:
            continue
        if not hasattr(problem, "quadratic_form"):
            raise ReferenceUnsupportedError(
                f"node {p}: explicit Extended ADMM needs quadratic local problems, got {type(problem).__name__}"
            )
        E, w = problem.quadratic_form()
        idx = np.concatenate(
            [layout.bases[p] + np.arange(layout.slots[p][l].start, layout.slots[p][l].stop) for l in problem.domain]
        )
        H[np.ix_(idx, idx)] += 2.0 * E
        g[idx] += w
    return H, g


def extended_admm_reference(
    net: Network,
    coloring: Coloring,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    iterations: int = None,
    max_scalars: int = None,
) -> ReferenceTrace:
    """
    Run the C-block Extended ADMM on the explicit copy formulation

    Columns of the constraint matrix are grouped by node color; each
    iteration minimizes the augmented Lagrangian over one color block at a
    time (in color order, latest values of the other blocks), then takes
    the dual step lambda += rho * A x.

    Args:
        net, coloring, cmap, problems: as for run_algorithm1 (quadratic problems only)
        config: rho, and max_cs as the default iteration count
        iterations: number of iterations to record
        max_scalars: size guard on the number of copies

    Returns:
        ReferenceTrace with copies and multipliers per iteration
    """
    layout = CopyLayout(net, cmap, problems)
    limit = max_scalars if max_scalars is not None else Config.REFERENCE_MAX_SCALARS
    if layout.total_dim > limit:
        raise ReferenceUnsupportedError(
            f"instance has {layout.total_dim} copies, explicit reference is capped at {limit}"
        )
    iterations = iterations or config.max_cs
    rho = config.rho

    A, rows = _constraint_matrix(layout)
    H_full, g = _cost(layout)
    trace = ReferenceTrace(layout=layout, coloring=coloring, A=A, rows=rows)

    blocks = []
    for members in coloring.color_classes:
        cols = [layout.bases[p] + np.arange(layout.dims[p]) for p in members]
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        Ac = A[:, cols]
        Hc = H_full[np.ix_(cols, cols)] + rho * Ac.T @ Ac
        blocks.append((cols, Ac, Hc))

    x = np.zeros(layout.total_dim)
    lam = np.zeros(len(rows))
    logger.debug(f"Explicit Extended ADMM: {layout.total_dim} copies, {len(rows)} constraints, {len(blocks)} blocks")

    for _ in range(iterations):
        for cols, Ac, Hc in blocks:
            if cols.size == 0:
                continue
            r = A @ x - Ac @ x[cols]
            rhs = -(g[cols] + Ac.T @ lam + rho * Ac.T @ r)
            try:
                x[cols] = solve(Hc, rhs, assume_a="sym")
            except LinAlgError as e:
                raise EngineError(f"color block is singular: {e}")
        lam = lam + rho * (A @ x)
        trace.copies.append(x.copy())
        trace.duals.append(lam.copy())
    return trace
