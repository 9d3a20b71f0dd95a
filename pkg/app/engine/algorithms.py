"""
Distributed algorithms
Color-sequenced Extended ADMM for partial variables, its 2-block counterpart,
the Steiner-augmented version for non-connected variables, and general-form
consensus ADMM for star-shaped components
"""
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from engine.local import local_solve
from engine.state import CopyLayout, CopyState, CsRecord, EngineConfig, EngineError, RunTrace
from graph.coloring import Coloring
from graph.components import ComponentMap, star_hubs
from graph.network import GraphError, Network
from graph.steiner import augment_components
from harness.metrics import relative_error
from utils.logger import logger


IterationCallback = Callable[[CopyState, int], None]


def node_v_alg1(state: CopyState, p: int, coloring: Coloring) -> np.ndarray:
    """v for every copy of node p: gamma - rho * (fresh smaller-color + stale larger-color neighbor copies)"""
    layout = state.layout
    rho = state.rho
    color = coloring.color_of
    acc = np.zeros(layout.dims[p])
    for link in layout.links[p]:
        j = link.neighbor
        source = state.x[j] if color[j] < color[p] else state.x_prev[j]
        acc[link.own] += source[link.other]
    return state.gamma[p] - rho * acc


def compute_v_alg1(state: CopyState, p: int, l: int, coloring: Coloring) -> np.ndarray:
    """v_l^{(p)} at the point of the sweep where node p updates"""
    slot = state.slot(p, l)
    return node_v_alg1(state, p, coloring)[slot]


def _dual_increment(state: CopyState, p: int) -> np.ndarray:
    """sum over neighbors sharing a component of (x^{(p)} - x^{(j)}), in ascending neighbor order"""
    inc = np.zeros(state.layout.dims[p])
    xp = state.x[p]
    for link in state.layout.links[p]:
        inc[link.own] += xp[link.own] - state.x[link.neighbor][link.other]
    return inc


def dual_update_alg1(state: CopyState, p: int, l: int) -> np.ndarray:
    """gamma_l^{(p)} after the color sweep; the state is not modified"""
    slot = state.slot(p, l)
    return state.gamma[p][slot] + state.rho * _dual_increment(state, p)[slot]


def _solve_node(state: CopyState, p: int, v: np.ndarray):
    layout = state.layout
    state.x[p] = local_solve(
        layout.problems[p],
        layout.slots[p],
        v,
        state.rho * layout.degree_vectors[p],
        state.x[p],
        node=p,
        free=layout.free_index[p],
    )


def _sweep_alg1(state: CopyState, coloring: Coloring, pool: Optional[ThreadPoolExecutor]):
    def update(p):
        _solve_node(state, p, node_v_alg1(state, p, coloring))

    for members in coloring.color_classes:
        if pool is None:
            for p in members:
                update(p)
        else:
            list(pool.map(update, members))

    increments = [_dual_increment(state, p) for p in range(len(state.x))]
    for p, inc in enumerate(increments):
        state.gamma[p] = state.gamma[p] + state.rho * inc


def node_v_alg2(state: CopyState, p: int) -> np.ndarray:
    """v for every copy of node p from the previous-iteration snapshot"""
    layout = state.layout
    acc = layout.degree_vectors[p] * state.x_prev[p]
    for link in layout.links[p]:
        acc[link.own] += state.x_prev[link.neighbor][link.other]
    return state.gamma[p] - 0.5 * state.rho * acc


def _sweep_alg2(state: CopyState, pool: Optional[ThreadPoolExecutor]):
    nodes = range(len(state.x))
    # all v are taken from the snapshot before any node moves
    vs = [node_v_alg2(state, p) for p in nodes]

    def update(p):
        _solve_node(state, p, vs[p])

    if pool is None:
        for p in nodes:
            update(p)
    else:
        list(pool.map(update, nodes))

    increments = [_dual_increment(state, p) for p in nodes]
    for p, inc in enumerate(increments):
        state.gamma[p] = state.gamma[p] + 0.5 * state.rho * inc


def _run(
    name: str,
    net: Network,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    reference,
    sweep: Callable,
    on_iteration: Optional[IterationCallback],
) -> Tuple[RunTrace, CopyState]:
    layout = CopyLayout(net, cmap, problems)
    state = CopyState(layout, config.rho)
    trace = RunTrace(algorithm=name)
    payload = layout.payload_per_cs
    cumulative = 0
    start = time.perf_counter()

    logger.info(
        f"Starting {name}: {net.node_count} nodes, {cmap.n_components} components, "
        f"rho={config.rho:g}, payload {payload} per CS"
    )
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for cs in range(1, config.max_cs + 1):
            state.snapshot()
            sweep(state, pool)
            state.iteration += 1
            cumulative += payload

            finite = state.all_finite()
            error = relative_error(state, reference) if reference is not None and finite else None
            trace.records.append(CsRecord(cs, error, payload, cumulative, time.perf_counter() - start))
            if on_iteration is not None:
                on_iteration(state, cs)
            logger.debug(f"{name} CS {cs}: error={error}")

            if not finite or (error is not None and error > config.divergence_limit):
                trace.status = "diverged"
                trace.message = "non-finite copies" if not finite else f"relative error {error:.3e}"
                break
            if config.target_error is not None and error is not None and error <= config.target_error:
                trace.status = "converged"
                trace.message = f"target error {config.target_error:g} reached"
                break
            if state.max_change() < config.tolerance:
                trace.status = "converged"
                trace.message = "copy change below tolerance"
                break
        else:
            trace.status = "max_steps"
    finally:
        if pool is not None:
            pool.shutdown()

    logger.info(f"{name} finished: {trace.status} after {trace.cs_count} CS, final error {trace.final_error}")
    return trace, state


def run_algorithm1(
    net: Network,
    coloring: Coloring,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    reference=None,
    on_iteration: Optional[IterationCallback] = None,
    name: str = "alg1",
) -> Tuple[RunTrace, CopyState]:
    """
    Color-sequenced Extended ADMM for a connected variable

    Per iteration the color classes update in order, each node solving its
    subproblem with v built from fresh copies of smaller-color neighbors and
    stale copies of larger-color ones; then every node updates its duals.
    With a global component map this is D-ADMM.

    Args:
        net: communication network
        coloring: proper coloring fixing the update order
        cmap: component map; every (augmented) induced subgraph must be connected
        problems: local problem per node (None for f_p = 0)
        config: rho and stopping parameters
        reference: centralized solution for relative errors, optional
        on_iteration: called with (state, cs) after every iteration

    Returns:
        (trace, final state)
    """
    if len(coloring.color_of) != net.node_count:
        raise EngineError("coloring does not match the network")
    return _run(
        name, net, cmap, problems, config, reference,
        lambda state, pool: _sweep_alg1(state, coloring, pool),
        on_iteration,
    )


def run_algorithm2(
    net: Network,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    reference=None,
    on_iteration: Optional[IterationCallback] = None,
    augment: bool = False,
    name: str = "alg2",
) -> Tuple[RunTrace, CopyState]:
    """2-block ADMM: all nodes update in parallel from the previous iterate.

    With augment=True non-connected components get Steiner trees first and
    relay copies update in closed form.
    """
    if augment:
        cmap = augment_components(net, cmap)
    return _run(name, net, cmap, problems, config, reference, _sweep_alg2, on_iteration)


def run_algorithm3(
    net: Network,
    coloring: Coloring,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    reference=None,
    on_iteration: Optional[IterationCallback] = None,
    name: str = "alg3",
) -> Tuple[RunTrace, CopyState]:
    """Steiner-tree augmentation of non-connected components, then Algorithm 1 over S_p + S_p'"""
    augmented = augment_components(net, cmap)
    return run_algorithm1(net, coloring, augmented, problems, config, reference, on_iteration, name=name)


class _ConsensusSweep:
    """Per-node proximal steps toward the hub averages z, then dual steps"""

    def __init__(self):
        self.index = None
        self.counts = None
        self.z = None

    def _prepare(self, layout: CopyLayout):
        cmap = layout.cmap
        offsets = cmap.offsets
        self.index = []
        for p, domain in enumerate(layout.domains):
            parts = [offsets[l] + np.arange(cmap.sizes[l]) for l in domain]
            self.index.append(np.concatenate(parts) if parts else np.zeros(0, dtype=int))
        self.counts = np.zeros(cmap.total_size)
        for idx in self.index:
            self.counts[idx] += 1.0
        self.z = np.zeros(cmap.total_size)

    def __call__(self, state: CopyState, pool: Optional[ThreadPoolExecutor]):
        layout = state.layout
        if self.index is None:
            self._prepare(layout)
        rho = state.rho
        nodes = range(len(state.x))

        def update(p):
            v = state.gamma[p] - rho * self.z[self.index[p]]
            state.x[p] = local_solve(
                layout.problems[p],
                layout.slots[p],
                v,
                np.full(layout.dims[p], rho),
                state.x[p],
                node=p,
                free=layout.free_index[p],
            )

        if pool is None:
            for p in nodes:
                update(p)
        else:
            list(pool.map(update, nodes))

        acc = np.zeros_like(self.z)
        for p in nodes:
            acc[self.index[p]] += state.x[p] + state.gamma[p] / rho
        self.z = acc / np.maximum(self.counts, 1.0)
        for p in nodes:
            state.gamma[p] = state.gamma[p] + rho * (state.x[p] - self.z[self.index[p]])


def run_consensus(
    net: Network,
    cmap: ComponentMap,
    problems: Sequence,
    config: EngineConfig,
    reference=None,
    on_iteration: Optional[IterationCallback] = None,
    name: str = "consensus",
) -> Tuple[RunTrace, CopyState]:
    """
    General-form consensus ADMM over star-shaped components

    Every owner solves its subproblem against the current average z_l, the
    hub of each component averages the owners' x + gamma/rho into the new
    z_l, and the owners take a dual step toward it. Only distributed when
    each component's owners form a star around a hub, which is checked.

    Returns:
        (trace, final state)
    """
    if cmap.is_augmented:
        raise EngineError("consensus runs on the original owners; Steiner trees are not supported")
    try:
        star_hubs(net, cmap)
    except GraphError as e:
        raise EngineError(f"general-form consensus needs star-shaped components: {e}")
    return _run(name, net, cmap, problems, config, reference, _ConsensusSweep(), on_iteration)
