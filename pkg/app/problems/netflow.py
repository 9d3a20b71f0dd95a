"""
Network flow problems
Instances of  min sum phi(x_ij)  s.t.  Bx = d  on a directed version of the
communication network: generation, per-node subproblems, centralized references
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from config import Config
from engine.state import LocalSolverError
from graph.components import ComponentMap
from graph.network import Network
from problems.errors import FlowError, InfeasibleError
from problems.projection import project_box_hyperplane
from problems.spg import spg
from utils.logger import logger


ARC_VALUES = np.array([10, 20, 30, 40, 50, 100])
ARC_PROBABILITIES = np.array([0.2, 0.2, 0.2, 0.2, 0.1, 0.1])
KINDS = ("quadratic", "delay")


@dataclass(frozen=True, eq=False)
class FlowInstance:
    """Directed arcs in lexicographic order; arc k is component k.

    weights are the a_ij of the quadratic instance (phi = (x - a)^2 / 2)
    or the capacities c_ij of the delay instance (phi = x / (c - x)).
    supply_units holds d in hundredths, so d sums to zero exactly.
    """

    node_count: int
    arcs: Tuple[Tuple[int, int], ...]
    weights: np.ndarray
    supply_units: np.ndarray
    kind: str
    seed: int = 0

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def supply(self) -> np.ndarray:
        return self.supply_units / 100.0

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """B: -1 at the tail, +1 at the head of every arc"""
        tails = [i for i, _ in self.arcs]
        heads = [j for _, j in self.arcs]
        cols = np.arange(self.n_arcs)
        data = np.concatenate((-np.ones(self.n_arcs), np.ones(self.n_arcs)))
        return sp.csr_matrix(
            (data, (np.concatenate((tails, heads)), np.concatenate((cols, cols)))),
            shape=(self.node_count, self.n_arcs),
        )

    @cached_property
    def incident(self) -> List[List[Tuple[int, float]]]:
        """(arc, sign of the arc in b_p) for every node, ascending arc"""
        table = [[] for _ in range(self.node_count)]
        for k, (i, j) in enumerate(self.arcs):
            table[i].append((k, -1.0))
            table[j].append((k, 1.0))
        return table

    def network(self) -> Network:
        return Network.from_edges(self.node_count, self.arcs)

    def component_map(self) -> ComponentMap:
        return ComponentMap.from_domains(
            self.node_count, [[k for k, _ in self.incident[p]] for p in range(self.node_count)], [1] * self.n_arcs
        )

    def local_problems(self) -> List["FlowLocalProblem"]:
        return [FlowLocalProblem(self, p) for p in range(self.node_count)]

    def caps(self) -> np.ndarray:
        return self.weights * (1.0 - Config.DELAY_SAFEGUARD)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return float(0.5 * np.sum((x - self.weights) ** 2))
        return float(np.sum(x / (self.weights - x)))


def generate_flow_instance(net: Network, K: int, seed: int, kind: str = "quadratic") -> FlowInstance:
    """
    Random flow instance over a communication network

    Each edge gets a uniformly random direction and a weight from
    {10, 20, 30, 40, 50, 100} (probabilities .2 .2 .2 .2 .1 .1). Then K
    times a source is drawn uniformly (redrawn while it reaches nothing),
    a sink uniformly from its reachable set, and f/100 is injected at the
    source and extracted at the sink, f drawn like the weights.

    Args:
        net: connected network
        K: number of source/sink pairs
        seed: seed for numpy's PCG64 generator
        kind: "quadratic" or "delay"

    Returns:
        FlowInstance
    """
    if kind not in KINDS:
        raise FlowError(f"unknown flow kind {kind!r}, expected one of {KINDS}")
    if K < 0:
        raise FlowError(f"K must be nonnegative, got {K}")
    rng = np.random.Generator(np.random.PCG64(seed))

    flips = rng.random(len(net.edges)) < 0.5
    weights = rng.choice(ARC_VALUES, size=len(net.edges), p=ARC_PROBABILITIES)
    directed = [((j, i) if flip else (i, j), float(w)) for (i, j), flip, w in zip(net.edges, flips, weights)]
    directed.sort(key=lambda item: item[0])
    arcs = tuple(a for a, _ in directed)

    graph = nx.DiGraph()
    graph.add_nodes_from(range(net.node_count))
    graph.add_edges_from(arcs)

    units = np.zeros(net.node_count, dtype=np.int64)
    reach_cache: Dict[int, List[int]] = {}
    for _ in range(K):
        for _attempt in range(100 * net.node_count):
            source = int(rng.integers(net.node_count))
            if source not in reach_cache:
                reach_cache[source] = sorted(nx.descendants(graph, source))
            if reach_cache[source]:
                break
        else:
            raise FlowError("no node reaches any other node along the arcs")
        reachable = reach_cache[source]
        sink = reachable[int(rng.integers(len(reachable)))]
        f = int(rng.choice(ARC_VALUES, p=ARC_PROBABILITIES))
        units[source] -= f
        units[sink] += f

    instance = FlowInstance(
        node_count=net.node_count,
        arcs=arcs,
        weights=np.array([w for _, w in directed]),
        supply_units=units,
        kind=kind,
        seed=seed,
    )
    logger.info(f"Generated {kind} flow instance: {instance.n_arcs} arcs, {K} commodities, seed {seed}")
    return instance


def solve_local_quadratic(b, d_p: float, a, v, weights) -> np.ndarray:
    """
    argmin sum (y - a)^2 / 4 + v'y + 1/2 sum weights y^2  s.t.  b'y = d_p

    Stationarity gives y = (a/2 - v - mu b) / (1/2 + weights) with one
    scalar multiplier mu fixed by the constraint (b entries are +-1).
    """
    b, a, v, w = (np.asarray(t, dtype=float) for t in (b, a, v, weights))
    denom = 0.5 + w
    free = (0.5 * a - v) / denom
    mu = (float(b @ free) - d_p) / float(np.sum(b * b / denom))
    return free - mu * b / denom


def solve_local_delay(b, d_p: float, c, v, weights, x0=None, caps=None, tol: float = None) -> np.ndarray:
    """
    argmin sum y/(2(c - y)) + v'y + 1/2 sum weights y^2
    s.t. b'y = d_p, 0 <= y <= caps, by spectral projected gradient

    caps defaults to c (1 - DELAY_SAFEGUARD), which keeps the delay finite.
    """
    b, c, v, w = (np.asarray(t, dtype=float) for t in (b, c, v, weights))
    caps = c * (1.0 - Config.DELAY_SAFEGUARD) if caps is None else np.asarray(caps, dtype=float)

    def fun(y):
        return float(np.sum(0.5 * y / (c - y) + v * y + 0.5 * w * y * y))

    def grad(y):
        return 0.5 * c / (c - y) ** 2 + v + w * y

    def project(y):
        return project_box_hyperplane(y, b, d_p, caps)

    if x0 is None:
        x0 = -v / np.where(w > 0, w, 1.0)
    result = spg(fun, grad, project, x0, tol=tol)
    if not result.converged:
        reason = "SPG stalled above its residual floor" if result.stalled else "SPG hit its iteration cap"
        raise LocalSolverError(reason, residual=result.residual)
    return result.x


class FlowLocalProblem:
    """f_p: half the cost of every incident arc plus the indicator of b_p'y = d_p"""

    def __init__(self, instance: FlowInstance, p: int):
        self.instance = instance
        self.node = p
        entries = instance.incident[p]
        self.domain = tuple(k for k, _ in entries)
        self.b = np.array([s for _, s in entries])
        self.d = float(instance.supply[p])
        self.params = instance.weights[list(self.domain)]
        self.caps = instance.caps()[list(self.domain)] if instance.kind == "delay" else None

    def solve(self, v, weights, x0=None):
        vv = np.array([float(np.asarray(v[k]).ravel()[0]) for k in self.domain])
        ww = np.array([float(weights[k]) for k in self.domain])
        if self.instance.kind == "quadratic":
            y = solve_local_quadratic(self.b, self.d, self.params, vv, ww)
        else:
            start = None if x0 is None else np.array([float(np.asarray(x0[k]).ravel()[0]) for k in self.domain])
            try:
                y = solve_local_delay(self.b, self.d, self.params, vv, ww, x0=start, caps=self.caps)
            except LocalSolverError as e:
                raise LocalSolverError(e.reason, node=self.node, residual=e.residual)
        return {k: np.array([y[i]]) for i, k in enumerate(self.domain)}


def delay_arc_response(t, c, caps) -> np.ndarray:
    """argmin over [0, caps] of x/(c - x) + t x, per arc"""
    t = np.asarray(t, dtype=float)
    x = np.zeros_like(t)
    active = -t > 1.0 / c
    x[active] = c[active] - np.sqrt(c[active] / -t[active])
    return np.clip(x, 0.0, caps)


def _delay_response_slope(t, c, x, caps) -> np.ndarray:
    """-dx/dt of the per-arc response, zero where a bound is active"""
    slope = np.zeros_like(x)
    inside = (x > 0) & (x < caps)
    slope[inside] = 0.5 * np.sqrt(c[inside]) * (-t[inside]) ** -1.5
    return slope


def _grounded(matrix: sp.spmatrix) -> sp.csc_matrix:
    return sp.csc_matrix(matrix)[1:, 1:]


def centralized_reference(instance: FlowInstance, tol: float = 1e-10, max_iters: int = 500) -> np.ndarray:
    """
    Centralized solution x*

    Quadratic: x = a - B'lam with BB'lam = Ba - d (node 0 grounded).
    Delay: damped Newton ascent on the flow-conservation dual with the
    closed-form per-arc response, until ||Bx - d||_inf <= tol.
    """
    B = instance.incidence
    d = instance.supply
    if instance.kind == "quadratic":
        a = instance.weights
        rhs = B @ a - d
        lam = np.zeros(instance.node_count)
        if instance.node_count > 1:
            lam[1:] = spsolve(_grounded(B @ B.T), rhs[1:])
        x = a - B.T @ lam
        residual = float(np.max(np.abs(B @ x - d)))
        logger.info(f"Centralized quadratic flow: residual {residual:.2e}")
        return x

    c = instance.weights
    caps = instance.caps()
    lam = np.zeros(instance.node_count)

    def dual(lam_):
        t = B.T @ lam_
        x_ = delay_arc_response(t, c, caps)
        return float(np.sum(x_ / (c - x_)) + t @ x_ - lam_ @ d), x_, t

    q, x, t = dual(lam)
    damping = 1.0
    for it in range(max_iters):
        g = B @ x - d
        residual = float(np.max(np.abs(g)))
        if residual <= tol:
            logger.info(f"Centralized delay flow: residual {residual:.2e} after {it} Newton steps")
            return x
        H = B @ sp.diags(_delay_response_slope(t, c, x, caps)) @ B.T
        step = np.zeros(instance.node_count)
        reduced = _grounded(H) + damping * sp.identity(instance.node_count - 1, format="csc")
        step[1:] = spsolve(reduced, g[1:])

        size = 1.0
        for _ in range(60):
            q_new, x_new, t_new = dual(lam + size * step)
            if q_new >= q + 1e-4 * size * float(g @ step):
                break
            size *= 0.5
        else:
            damping *= 10.0
            continue
        lam, q, x, t = lam + size * step, q_new, x_new, t_new
        damping = max(1e-12, damping * 0.5) if size == 1.0 else min(1e6, damping * 2.0)

    raise InfeasibleError(
        f"delay flow did not reach conservation residual {tol:g} (residual {residual:.2e}); capacities may be too tight"
    )


def conservation_residual(instance: FlowInstance, x) -> float:
    return float(np.max(np.abs(instance.incidence @ np.asarray(x, dtype=float) - instance.supply)))


def flow_from_copies(instance: FlowInstance, state) -> np.ndarray:
    """Arc values taken from the tail node's copy"""
    return np.array([state.copy(i, k)[0] for k, (i, _) in enumerate(instance.arcs)])


def write_flow_instance(instance: FlowInstance, path):
    """Header "flow P A kind seed", arc lines "i j weight", supply lines "p d_p" """
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"flow {instance.node_count} {instance.n_arcs} {instance.kind} {instance.seed}\n")
        for (i, j), w in zip(instance.arcs, instance.weights):
            f.write(f"{i} {j} {w:.17g}\n")
        for p, units in enumerate(instance.supply_units):
            f.write(f"{p} {units / 100.0:.17g}\n")


def read_flow_instance(path) -> FlowInstance:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.split() for line in f if line.strip()]
    try:
        tag, P, A, kind, seed = lines[0]
        if tag != "flow":
            raise FlowError(f"{path}: not a flow instance")
        P, A = int(P), int(A)
        arcs = tuple((int(i), int(j)) for i, j, _ in lines[1:1 + A])
        weights = np.array([float(w) for _, _, w in lines[1:1 + A]])
        supply = np.array([float(d) for _, d in lines[1 + A:1 + A + P]])
    except ValueError as e:
        raise FlowError(f"{path}: malformed flow instance ({e})")
    if kind not in KINDS or len(arcs) != A or len(supply) != P:
        raise FlowError(f"{path}: malformed flow instance")
    return FlowInstance(
        node_count=P,
        arcs=arcs,
        weights=weights,
        supply_units=np.rint(supply * 100.0).astype(np.int64),
        kind=kind,
        seed=int(seed),
    )


def make_flow_problem(instance: FlowInstance) -> Tuple[Network, ComponentMap, list]:
    """Network, component map and local problems for the distributed runs"""
    return instance.network(), instance.component_map(), instance.local_problems()

