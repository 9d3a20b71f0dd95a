"""
Graph coloring
Proper node coloring that fixes the order in which nodes update
"""
from dataclasses import dataclass
from typing import Tuple

import networkx as nx

from graph.network import Network, GraphError


@dataclass(frozen=True)
class Coloring:
    """Proper coloring: color_of[p] in 0..num_colors-1, classes sorted by node id"""

    color_of: Tuple[int, ...]
    color_classes: Tuple[Tuple[int, ...], ...]

    @property
    def num_colors(self) -> int:
        return len(self.color_classes)

    @classmethod
    def from_colors(cls, net: Network, colors) -> "Coloring":
        """Build and validate a coloring from a per-node color sequence"""
        colors = tuple(int(c) for c in colors)
        if len(colors) != net.node_count:
            raise GraphError(f"expected {net.node_count} colors, got {len(colors)}")
        used = sorted(set(colors))
        if used != list(range(len(used))):
            raise GraphError(f"colors must be 0..C-1 with every class nonempty, got {used}")
        for i, j in net.edges:
            if colors[i] == colors[j]:
                raise GraphError(f"improper coloring: edge ({i}, {j}) joins color {colors[i]}")
        classes = tuple(
            tuple(p for p in range(net.node_count) if colors[p] == c) for c in used
        )
        return cls(color_of=colors, color_classes=classes)


def _ascending(graph, colors):
    return sorted(graph)


def greedy_color(net: Network) -> Coloring:
    """Smallest feasible color, nodes processed in ascending id.

    Uses at most max_degree + 1 colors.
    """
    assignment = nx.greedy_color(net.to_networkx(), strategy=_ascending)
    return Coloring.from_colors(net, [assignment[p] for p in range(net.node_count)])
