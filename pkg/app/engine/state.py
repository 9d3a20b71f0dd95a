"""
Engine state
Copy layout, per-node copies and condensed duals, run configuration and traces
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import Config
from graph.components import ComponentMap, induced_subgraph, is_connected
from graph.network import Network


class EngineError(RuntimeError):
    pass


class DisconnectedComponentError(EngineError):
    def __init__(self, components):
        self.components = tuple(components)
        shown = list(self.components[:10])
        super().__init__(
            f"components {shown} (of {len(self.components)}) induce disconnected subgraphs; "
            f"use run_algorithm3 or augment the component map first"
        )


class LocalSolverError(EngineError):
    def __init__(self, message, node=None, residual=None):
        self.reason = message
        self.node = node
        self.residual = residual
        detail = f" at node {node}" if node is not None else ""
        if residual is not None:
            detail += f" (residual {residual:.3e})"
        super().__init__(f"{message}{detail}")


class ReferenceUnsupportedError(EngineError):
    pass


class EngineConfig(BaseModel):
    """Parameters of one distributed run"""

    model_config = ConfigDict(extra="forbid")

    rho: float = Field(gt=0)
    max_cs: int = Field(default=Config.DEFAULT_MAX_CS, ge=1)
    tolerance: float = Field(default=Config.DEFAULT_TOLERANCE, ge=0)
    target_error: Optional[float] = Field(default=None, gt=0)
    workers: int = Field(default=Config.ENGINE_WORKERS, ge=1)
    divergence_limit: float = Field(default=Config.DIVERGENCE_LIMIT, gt=0)


@dataclass
class CsRecord:
    cs: int
    relative_error: Optional[float]
    payload: int
    payload_cumulative: int
    wallclock: float


@dataclass
class RunTrace:
    """Per-communication-step records of one run"""

    algorithm: str
    records: List[CsRecord] = field(default_factory=list)
    status: str = "running"
    message: str = ""

    @property
    def cs_count(self) -> int:
        return self.records[-1].cs if self.records else 0

    @property
    def final_error(self) -> Optional[float]:
        return self.records[-1].relative_error if self.records else None

    def first_below(self, threshold: float) -> Optional[CsRecord]:
        """First record whose error is at most threshold"""
        for record in self.records:
            if record.relative_error is not None and record.relative_error <= threshold:
                return record
        return None

    def cs_to(self, threshold: float) -> Optional[int]:
        record = self.first_below(threshold)
        return record.cs if record else None

    def payload_to(self, threshold: float) -> Optional[int]:
        record = self.first_below(threshold)
        return record.payload_cumulative if record else None


@dataclass(frozen=True)
class Link:
    """Components node p shares with neighbor j, as positions in both node vectors"""

    neighbor: int
    components: Tuple[int, ...]
    own: np.ndarray
    other: np.ndarray


def free_positions(problem, slots: Dict[int, slice]) -> np.ndarray:
    """Flat positions of the copies whose component the node's function does not depend on"""
    domain = set(problem.domain) if problem is not None else set()
    parts = [np.arange(s.start, s.stop) for l, s in slots.items() if l not in domain]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


class CopyLayout:
    """Where every copy x_l^{(p)} lives.

    Node p keeps one flat vector over S_p + S_p' (ascending component id,
    each component occupying sizes[l] entries). Links hold, per node and in
    ascending neighbor order, the positions of components shared over an
    edge of the (augmented) induced subgraph.
    """

    def __init__(self, net: Network, cmap: ComponentMap, problems: Sequence = None):
        if cmap.node_count != net.node_count:
            raise EngineError(
                f"component map covers {cmap.node_count} nodes, network has {net.node_count}"
            )
        self.net = net
        self.cmap = cmap
        P = net.node_count

        self.domains: List[Tuple[int, ...]] = [cmap.full_domain(p) for p in range(P)]
        self.slots: List[Dict[int, slice]] = []
        self.dims: List[int] = []
        for p in range(P):
            slots, start = {}, 0
            for l in self.domains[p]:
                slots[l] = slice(start, start + cmap.sizes[l])
                start += cmap.sizes[l]
            self.slots.append(slots)
            self.dims.append(start)

        edge_components, disconnected = self._edge_components()
        if disconnected:
            raise DisconnectedComponentError(disconnected)

        self.degree: List[Dict[int, int]] = [{l: 0 for l in self.domains[p]} for p in range(P)]
        for (i, j), comps in edge_components.items():
            for l in comps:
                self.degree[i][l] += 1
                self.degree[j][l] += 1

        self.links: List[List[Link]] = [[] for _ in range(P)]
        for p in range(P):
            for j in net.neighbors(p):
                comps = edge_components.get((min(p, j), max(p, j)))
                if not comps:
                    continue
                own = np.concatenate([np.arange(self.slots[p][l].start, self.slots[p][l].stop) for l in comps])
                other = np.concatenate([np.arange(self.slots[j][l].start, self.slots[j][l].stop) for l in comps])
                self.links[p].append(Link(neighbor=j, components=tuple(comps), own=own, other=other))

        self.degree_vectors: List[np.ndarray] = []
        for p in range(P):
            vec = np.zeros(self.dims[p])
            for l, s in self.slots[p].items():
                vec[s] = self.degree[p][l]
            self.degree_vectors.append(vec)

        self.problems = list(problems) if problems is not None else [None] * P
        if len(self.problems) != P:
            raise EngineError(f"expected {P} local problems, got {len(self.problems)}")
        for p, problem in enumerate(self.problems):
            if problem is None:
                continue
            extra = set(problem.domain) - set(cmap.node_domains[p])
            if extra:
                raise EngineError(f"local problem at node {p} depends on components {sorted(extra)} outside S_p")
        self.free_index: List[np.ndarray] = [free_positions(self.problems[p], self.slots[p]) for p in range(P)]

        # original-domain copies in (node, component) order, mapped into the reference vector
        offsets = cmap.offsets
        own_pos, ref_pos = [], []
        base = 0
        for p in range(P):
            for l in cmap.node_domains[p]:
                s = self.slots[p][l]
                own_pos.append(base + np.arange(s.start, s.stop))
                ref_pos.append(offsets[l] + np.arange(cmap.sizes[l]))
            base += self.dims[p]
        self.bases = np.concatenate(([0], np.cumsum(self.dims)))[:-1].astype(int)
        self.original_index = np.concatenate(own_pos) if own_pos else np.zeros(0, dtype=int)
        self.reference_index = np.concatenate(ref_pos) if ref_pos else np.zeros(0, dtype=int)

    def _edge_components(self):
        """Map each network edge to the components whose (augmented) subgraph contains it"""
        cmap = self.cmap
        cache = {}
        edge_components: Dict[Tuple[int, int], List[int]] = {}
        disconnected = []
        for l in range(cmap.n_components):
            key = (cmap.owners[l], cmap.tree_edges[l])
            if key not in cache:
                sub = induced_subgraph(self.net, cmap, l, augmented=True)
                cache[key] = (sub.edges, is_connected(sub))
            edges, connected = cache[key]
            if not connected:
                disconnected.append(l)
                continue
            for e in edges:
                edge_components.setdefault(e, []).append(l)
        return edge_components, disconnected

    @property
    def total_dim(self) -> int:
        return int(sum(self.dims))

    @property
    def payload_per_cs(self) -> int:
        return self.total_dim


class CopyState:
    """All copies x_l^{(p)} and condensed duals gamma_l^{(p)}, zero at k = 1"""

    def __init__(self, layout: CopyLayout, rho: float = 1.0):
        self.layout = layout
        self.rho = float(rho)
        self.x = [np.zeros(d) for d in layout.dims]
        self.x_prev = [np.zeros(d) for d in layout.dims]
        self.gamma = [np.zeros(d) for d in layout.dims]
        self.iteration = 1

    def copy(self, p: int, l: int) -> np.ndarray:
        return self.x[p][self.slot(p, l)]

    def dual(self, p: int, l: int) -> np.ndarray:
        return self.gamma[p][self.slot(p, l)]

    def slot(self, p: int, l: int) -> slice:
        try:
            return self.layout.slots[p][l]
        except KeyError:
            raise EngineError(f"node {p} holds no copy of component {l}")

    def snapshot(self):
        """Freeze the copies at the start of an iteration"""
        for prev, cur in zip(self.x_prev, self.x):
            prev[:] = cur

    def max_change(self) -> float:
        changes = [np.max(np.abs(c - p)) for c, p in zip(self.x, self.x_prev) if c.size]
        return float(max(changes)) if changes else 0.0

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(c)) for c in self.x) and all(np.all(np.isfinite(g)) for g in self.gamma)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.x) if self.x else np.zeros(0)

    def original_copies(self) -> np.ndarray:
        """Copies of S_p (no Steiner copies), concatenated in (node, component) order"""
        return self.flat()[self.layout.original_index]

    def dual_sum(self, l: int) -> np.ndarray:
        """Sum of gamma_l over the nodes holding a copy of l"""
        total = np.zeros(self.layout.cmap.sizes[l])
        for p in self.layout.cmap.augmented_owners[l]:
            total += self.dual(p, l)
        return total
