"""
Component map and induced subgraphs
Which nodes depend on which components, and the subgraph each component induces
"""
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from graph.network import Network, GraphError, Edge


@dataclass(frozen=True)
class ComponentMap:
    """Bidirectional map between nodes and the components they depend on.

    node_domains[p] is S_p, owners[l] is V_l. After Steiner augmentation
    steiner_domains[p] is S_p', augmented_owners[l] is V_l' and
    tree_edges[l] holds the tree edges F_l (empty for untouched components).
    """

    node_count: int
    sizes: Tuple[int, ...]
    owners: Tuple[Tuple[int, ...], ...]
    node_domains: Tuple[Tuple[int, ...], ...]
    steiner_domains: Tuple[Tuple[int, ...], ...]
    augmented_owners: Tuple[Tuple[int, ...], ...]
    tree_edges: Tuple[Tuple[Edge, ...], ...]

    @classmethod
    def from_domains(
        cls,
        node_count: int,
        domains: Sequence[Iterable[int]],
        sizes: Optional[Sequence[int]] = None,
    ) -> "ComponentMap":
        """
        Build a map from per-node domains S_p

        Args:
            node_count: number of nodes P
            domains: domains[p] lists the components f_p depends on
            sizes: length of each component vector (default: all scalars)
        """
        if len(domains) != node_count:
            raise GraphError(f"expected {node_count} domains, got {len(domains)}")
        node_domains = tuple(tuple(sorted(set(int(l) for l in d))) for d in domains)
        used = [l for d in node_domains for l in d]
        if any(l < 0 for l in used):
            raise GraphError("component ids must be nonnegative")
        n = len(sizes) if sizes is not None else (max(used) + 1 if used else 0)
        if used and max(used) >= n:
            raise GraphError(f"component {max(used)} has no declared size")
        sizes = tuple(int(s) for s in sizes) if sizes is not None else (1,) * n
        if any(s < 1 for s in sizes):
            raise GraphError("component sizes must be positive")

        owners_lists = [[] for _ in range(n)]
        for p, d in enumerate(node_domains):
            for l in d:
                owners_lists[l].append(p)
        orphans = [l for l in range(n) if not owners_lists[l]]
        if orphans:
            raise GraphError(f"components without owners: {orphans[:10]}")
        owners = tuple(tuple(o) for o in owners_lists)

        return cls(
            node_count=node_count,
            sizes=sizes,
            owners=owners,
            node_domains=node_domains,
            steiner_domains=tuple(() for _ in range(node_count)),
            augmented_owners=owners,
            tree_edges=tuple(() for _ in range(n)),
        )

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Start of each component in the concatenated variable"""
        return np.concatenate(([0], np.cumsum(self.sizes)))[:-1].astype(int)

    @property
    def total_size(self) -> int:
        return int(sum(self.sizes))

    @property
    def is_augmented(self) -> bool:
        return any(self.tree_edges)

    def full_domain(self, p: int) -> Tuple[int, ...]:
        """S_p union S_p', ascending"""
        return tuple(sorted(self.node_domains[p] + self.steiner_domains[p]))

    def is_partial(self) -> bool:
        """True when no component is shared by every node"""
        return all(len(o) < self.node_count for o in self.owners)

    def payload_per_cs(self) -> int:
        """Scalars a full round of broadcasts carries: sum over nodes of their copies"""
        return int(sum(self.sizes[l] for p in range(self.node_count) for l in self.full_domain(p)))

    def global_mode(self) -> "ComponentMap":
        """Same components, every node owning all of them"""
        everything = tuple(range(self.n_components))
        return ComponentMap.from_domains(self.node_count, [everything] * self.node_count, self.sizes)

    def with_trees(self, trees: Mapping[int, Tuple[Iterable[int], Iterable[Edge]]]) -> "ComponentMap":
        """Attach Steiner trees {l: (tree_nodes, tree_edges)} to their components"""
        augmented = list(self.augmented_owners)
        tree_edges = list(self.tree_edges)
        steiner = [set(d) for d in self.steiner_domains]
        for l, (nodes, edges) in trees.items():
            nodes = tuple(sorted(set(nodes)))
            if not set(self.owners[l]) <= set(nodes):
                raise GraphError(f"tree for component {l} misses required nodes")
            augmented[l] = nodes
            tree_edges[l] = tuple(sorted((min(i, j), max(i, j)) for i, j in edges))
            for p in set(nodes) - set(self.owners[l]):
                steiner[p].add(l)
        return replace(
            self,
            augmented_owners=tuple(augmented),
            tree_edges=tuple(tree_edges),
            steiner_domains=tuple(tuple(sorted(s)) for s in steiner),
        )


@dataclass(frozen=True)
class InducedSubgraph:
    """G_l (or G_l' after augmentation) with per-node degrees D_{p,l}"""

    component: int
    nodes: Tuple[int, ...]
    edges: Tuple[Edge, ...]
    degree_of: Dict[int, int]

    def neighbors(self, p: int) -> Tuple[int, ...]:
        return tuple(sorted([j for i, j in self.edges if i == p] + [i for i, j in self.edges if j == p]))


def _restricted_edges(net: Network, nodes: Iterable[int]) -> Tuple[Edge, ...]:
    members = set(nodes)
    return tuple(
        (p, j) for p in sorted(members) for j in net.adjacency[p] if j > p and j in members
    )


def induced_subgraph(net: Network, cmap: ComponentMap, l: int, augmented: bool = False) -> InducedSubgraph:
    """
    Subgraph induced by component l

    Args:
        net: communication network
        cmap: component map
        l: component id
        augmented: use V_l' and E_l' = E_l plus the Steiner tree edges F_l

    Returns:
        InducedSubgraph with degrees D_{p,l}
    """
    if not 0 <= l < cmap.n_components:
        raise GraphError(f"unknown component id {l} (have {cmap.n_components})")

    edges = set(_restricted_edges(net, cmap.owners[l]))
    nodes = cmap.owners[l]
    if augmented and cmap.tree_edges[l]:
        edges |= set(cmap.tree_edges[l])
        nodes = cmap.augmented_owners[l]
    edges = tuple(sorted(edges))

    degree = {p: 0 for p in nodes}
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    return InducedSubgraph(component=l, nodes=tuple(nodes), edges=edges, degree_of=degree)


def is_connected(sub: InducedSubgraph) -> bool:
    """True if the subgraph has a single connected component"""
    if len(sub.nodes) <= 1:
        return True
    graph = nx.Graph()
    graph.add_nodes_from(sub.nodes)
    graph.add_edges_from(sub.edges)
    return nx.is_connected(graph)


def non_connected_components(net: Network, cmap: ComponentMap) -> Tuple[int, ...]:
    """Components whose (unaugmented) induced subgraph is not connected"""
    return tuple(
        l for l in range(cmap.n_components) if not is_connected(induced_subgraph(net, cmap, l))
    )


def star_hubs(net: Network, cmap: ComponentMap) -> Tuple[int, ...]:
    """
    Hub of every component: the smallest owner adjacent to all other owners

    Raises:
        GraphError when some induced subgraph is not star-shaped
    """
    hubs = []
    for l, owners in enumerate(cmap.owners):
        hub = next((p for p in owners if all(q == p or net.has_edge(p, q) for q in owners)), None)
        if hub is None:
            raise GraphError(f"component {l} does not induce a star")
        hubs.append(hub)
    return tuple(hubs)
