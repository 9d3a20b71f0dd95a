"""
Steiner-tree augmentation
Connects the owners of non-connected components through relay (Steiner) nodes
"""
from typing import Dict, Iterable, Tuple

import networkx as nx
from networkx.algorithms.approximation import steiner_tree

from graph.components import ComponentMap, induced_subgraph, is_connected
from graph.network import Network, GraphError, Edge
from utils.logger import logger


def steiner_augment(net: Network, required: Iterable[int]) -> Tuple[Tuple[int, ...], Tuple[Edge, ...]]:
    """
    Unit-cost Steiner tree spanning the required nodes

    Metric-closure MST heuristic (shortest paths between required nodes,
    MST of the closure, paths expanded, MST again, non-required leaves
    pruned), within a factor 2 of the optimal edge count. A required set
    that already induces a connected subgraph gets a spanning tree of that
    subgraph, with no Steiner nodes.

    Args:
        net: connected communication network
        required: nodes the tree must contain

    Returns:
        (tree_nodes, tree_edges), both sorted, edges as (i, j) with i < j
    """
    required = sorted(set(int(p) for p in required))
    if not required:
        raise GraphError("Steiner tree needs at least one required node")
    bad = [p for p in required if not 0 <= p < net.node_count]
    if bad:
        raise GraphError(f"required nodes outside the network: {bad}")

    if len(required) == 1:
        return (required[0],), ()

    graph = net.to_networkx()
    restricted = graph.subgraph(required)
    if nx.is_connected(restricted):
        tree = nx.minimum_spanning_tree(restricted)
    else:
        tree = steiner_tree(graph, required, method="kou")

    nodes = tuple(sorted(tree.nodes()))
    edges = tuple(sorted((min(i, j), max(i, j)) for i, j in tree.edges()))
    if len(edges) != len(nodes) - 1:
        raise GraphError(f"Steiner construction returned a non-tree ({len(nodes)} nodes, {len(edges)} edges)")
    return nodes, edges


def augment_components(net: Network, cmap: ComponentMap) -> ComponentMap:
    """Attach a Steiner tree to every component whose induced subgraph is not connected.

    Connected components are left as they are (G_l' = G_l). Trees are cached
    per owner set, since many components can share one.
    """
    trees: Dict[int, Tuple[Tuple[int, ...], Tuple[Edge, ...]]] = {}
    cache: Dict[Tuple[int, ...], Tuple[Tuple[int, ...], Tuple[Edge, ...]]] = {}
    for l in range(cmap.n_components):
        if is_connected(induced_subgraph(net, cmap, l)):
            continue
        owners = cmap.owners[l]
        if owners not in cache:
            cache[owners] = steiner_augment(net, owners)
        trees[l] = cache[owners]

    augmented = cmap.with_trees(trees)
    summary = steiner_summary(augmented)
    logger.info(
        f"Steiner augmentation: {summary['augmented_components']} of {cmap.n_components} components, "
        f"{summary['steiner_nodes']} relay nodes"
    )
    return augmented


def steiner_summary(cmap: ComponentMap) -> dict:
    """How many components were augmented and how many nodes relay for one"""
    relays = [p for p in range(cmap.node_count) if cmap.steiner_domains[p]]
    return {
        "augmented_components": sum(1 for f in cmap.tree_edges if f),
        "steiner_nodes": len(relays),
        "steiner_node_fraction": len(relays) / cmap.node_count,
        "steiner_copies": sum(len(d) for d in cmap.steiner_domains),
    }
