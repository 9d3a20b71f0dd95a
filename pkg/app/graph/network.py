"""
Communication network
Immutable undirected graph, edge-list loading and random generation
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Tuple

import networkx as nx

from utils.logger import logger


class GraphError(ValueError):
    pass


Edge = Tuple[int, int]


@dataclass(frozen=True)
class Network:
    """Connected undirected graph on nodes 0..node_count-1.

    Edges are stored once as (i, j) with i < j; adjacency lists are sorted.
    Figures that label nodes from 1 map to id = label - 1.
    """

    node_count: int
    edges: Tuple[Edge, ...]
    adjacency: Tuple[Tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Edge], require_connected: bool = True) -> "Network":
        if node_count < 1:
            raise GraphError(f"node_count must be positive, got {node_count}")

        normalized = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise GraphError(f"edge ({i}, {j}) outside 0..{node_count - 1}")
            normalized.add((min(i, j), max(i, j)))

        ordered = tuple(sorted(normalized))
        neighbors: List[List[int]] = [[] for _ in range(node_count)]
        for i, j in ordered:
            neighbors[i].append(j)
            neighbors[j].append(i)
        adjacency = tuple(tuple(sorted(n)) for n in neighbors)

        net = cls(node_count=node_count, edges=ordered, adjacency=adjacency)
        if require_connected and not nx.is_connected(net.to_networkx()):
            raise GraphError("communication network is not connected")
        return net

    @property
    def max_degree(self) -> int:
        return max(len(n) for n in self.adjacency)

    def neighbors(self, p: int) -> Tuple[int, ...]:
        return self.adjacency[p]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def to_networkx(self) -> nx.Graph:
        """Graph view with nodes and edges inserted in ascending order"""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.edges)
        return graph


def load_edge_list(path) -> Network:
    """
    Load a network from a whitespace-separated edge list

    Args:
        path: file with one "i j" pair per line, 0-based ids; blank lines
              and lines starting with '#' are skipped

    Returns:
        Network on nodes 0..max_id
    """
    edges = []
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise GraphError(f"cannot read network file {path}: {e}")
    with f:
        for line_no, line in enumerate(f, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{line_no}: expected two node ids, got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{line_no}: node ids must be integers, got {text!r}")
            if i < 0 or j < 0:
                raise GraphError(f"{path}:{line_no}: negative node id")
            edges.append((i, j))

    if not edges:
        raise GraphError(f"{path}: no edges found")

    node_count = max(max(e) for e in edges) + 1
    net = Network.from_edges(node_count, edges)
    logger.info(f"Loaded network from {path}: {net.node_count} nodes, {len(net.edges)} edges")
    return net


def write_edge_list(net: Network, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {net.node_count} nodes, {len(net.edges)} edges\n")
        for i, j in net.edges:
            f.write(f"{i} {j}\n")


def generate_barabasi_albert(P: int, m: int, seed: int) -> Network:
    """Preferential-attachment graph with (P - m) * m edges.

    Uses networkx's variant (star seed graph on m + 1 nodes, no multi-edges),
    driven by Python's Mersenne Twister seeded with `seed`.
    """
    if m < 1 or P <= m:
        raise GraphError(f"Barabasi-Albert needs P > m >= 1, got P={P}, m={m}")
    graph = nx.barabasi_albert_graph(P, m, seed=seed)
    return Network.from_edges(P, graph.edges())


def network_stats(net: Network, num_colors: int = None) -> dict:
    """Size, diameter, color count and average degree of a network"""
    stats = {
        "nodes": net.node_count,
        "edges": len(net.edges),
        "diameter": nx.diameter(net.to_networkx()) if net.node_count > 1 else 0,
        "average_degree": 2.0 * len(net.edges) / net.node_count,
    }
    if num_colors is not None:
        stats["colors"] = num_colors
    return stats
