"""
Shared fixtures: random connected networks and quadratic partial-variable instances
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "app"))

from engine.local import QuadraticLocalProblem  # noqa: E402
from graph.components import ComponentMap  # noqa: E402
from graph.network import Network  # noqa: E402


def random_network(rng, P, extra=0.3):
    """Random spanning tree plus extra edges with probability `extra`"""
    edges = [(int(rng.integers(p)), p) for p in range(1, P)]
    for i in range(P):
        for j in range(i + 1, P):
            if rng.random() < extra:
                edges.append((i, j))
    return Network.from_edges(P, edges)


def grow_connected(rng, net, size):
    """Owner set grown from a random node along network edges"""
    members = {int(rng.integers(net.node_count))}
    while len(members) < size:
        fringe = sorted({j for p in members for j in net.adjacency[p]} - members)
        if not fringe:
            break
        members.add(fringe[int(rng.integers(len(fringe)))])
    return members


def random_quadratics(rng, cmap, strength=0.5):
    """Strongly convex x'Ex + w'x per node over its domain (None for empty domains)"""
    problems = []
    for p, domain in enumerate(cmap.node_domains):
        if not domain:
            problems.append(None)
            continue
        dim = sum(cmap.sizes[l] for l in domain)
        M = rng.standard_normal((dim, dim))
        E = M.T @ M / dim + strength * np.eye(dim)
        problems.append(QuadraticLocalProblem(p, domain, cmap.sizes, E, rng.standard_normal(dim)))
    return problems


def random_partial_instance(seed, P=6, n_components=5, max_owners=3, max_size=2, connected=True):
    """(net, cmap, problems) with every component owned by a connected (or arbitrary) node set"""
    rng = np.random.Generator(np.random.PCG64(seed))
    net = random_network(rng, P)
    owners = []
    for _ in range(n_components):
        size = int(rng.integers(1, max_owners + 1))
        if connected:
            owners.append(grow_connected(rng, net, size))
        else:
            owners.append(set(int(p) for p in rng.choice(P, size=size, replace=False)))
    domains = [[l for l, o in enumerate(owners) if p in o] for p in range(P)]
    sizes = [int(rng.integers(1, max_size + 1)) for _ in range(n_components)]
    cmap = ComponentMap.from_domains(P, domains, sizes)
    return net, cmap, random_quadratics(rng, cmap)


@pytest.fixture
def partial_instance():
    return random_partial_instance


@pytest.fixture
def path_network():
    """0 - 1 - 2 - 3 - 4"""
    return Network.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def example_network():
    """Six nodes: a 4-cycle 0-1-2-3 with a tail 3-4-5"""
    return Network.from_edges(6, [(0, 1), (1, 2), (2, 3), (0, 3), (3, 4), (4, 5)])


@pytest.fixture
def experiment_ini(tmp_path):
    """Write an INI experiment file and return its path"""
    def write(text, name="experiment.ini"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def small_flow_ini():
    return """
[experiment]
name = tiny_flow
seed = 3
max_cs = 300
tolerance = 1e-12

[graph]
source = barabasi_albert
nodes = 12
attach = 2

[problem]
family = flow_quadratic
commodities = 4

[algorithm.alg1]
kind = alg1
rho = 2

[algorithm.alg2]
kind = alg2
rho = 2

[algorithm.nesterov]
kind = nesterov
"""

