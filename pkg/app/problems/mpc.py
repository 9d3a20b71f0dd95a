"""
Distributed MPC
Input-coupled linear subsystems, coupling patterns over the communication
network, condensation to an input-only quadratic, and centralized reference
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from engine.local import QuadraticLocalProblem, centralized_quadratic
from graph.components import ComponentMap
from graph.network import Network
from problems.errors import MpcError
from utils.logger import logger


PATTERNS = ("star", "generic", "nonconnected")
STABILITY = ("unstable", "stable")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def generate_couplings(net: Network, pattern: str, reach: int = 3, seed: int = 0) -> Tuple[Tuple[int, ...], ...]:
    """
    Coupling sets Omega_p (nodes whose input drives x_p), p always included

    star: Omega_p = N_p + {p}, so u_j is shared by j and its neighbors.
    generic: u_p starts at p with a fringe N_p; `reach` times a fringe node
        is drawn uniformly, made to depend on u_p, and its neighbors join the fringe.
    nonconnected: as generic, but any node can be drawn, fringe nodes with
        twice the weight of the others; owner sets may be disconnected.

    Returns:
        Omega_p per node, sorted
    """
    if pattern not in PATTERNS:
        raise MpcError(f"unknown coupling pattern {pattern!r}, expected one of {PATTERNS}")
    if reach < 0:
        raise MpcError(f"reach must be nonnegative, got {reach}")
    P = net.node_count

    if pattern == "star":
        return tuple(tuple(sorted(set(net.adjacency[p]) | {p})) for p in range(P))

    rng = _rng(seed)
    owners: List[set] = []
    for p in range(P):
        members = {p}
        fringe = set(net.adjacency[p])
        for _ in range(reach):
            if pattern == "generic":
                candidates = sorted(fringe - members)
                if not candidates:
                    break
                chosen = candidates[int(rng.integers(len(candidates)))]
            else:
                candidates = np.array([q for q in range(P) if q not in members])
                if candidates.size == 0:
                    break
                weight = np.array([2.0 if q in fringe else 1.0 for q in candidates])
                chosen = int(rng.choice(candidates, p=weight / weight.sum()))
            members.add(chosen)
            fringe |= set(net.adjacency[chosen])
        owners.append(members)

    omega = [set() for _ in range(P)]
    for j, members in enumerate(owners):
        for q in members:
            omega[q].add(j)
    return tuple(tuple(sorted(o)) for o in omega)


@dataclass(frozen=True, eq=False)
class MpcSystem:
    """x_p[t+1] = A_p x_p[t] + sum_{j in Omega_p} B_pj u_j[t], horizon T"""

    omega: Tuple[Tuple[int, ...], ...]
    horizon: int
    A: Tuple[np.ndarray, ...]
    B: Tuple[Dict[int, np.ndarray], ...]
    Q: Tuple[np.ndarray, ...]
    Qf: Tuple[np.ndarray, ...]
    R: Tuple[np.ndarray, ...]
    x0: Tuple[np.ndarray, ...]
    seed: int = 0
    stability: str = "unstable"

    @property
    def node_count(self) -> int:
        return len(self.omega)

    def state_dim(self, p: int) -> int:
        return self.A[p].shape[0]

    def input_dim(self, j: int) -> int:
        return self.R[j].shape[0]

    def input_sizes(self) -> List[int]:
        return [self.input_dim(j) * self.horizon for j in range(self.node_count)]

    def component_map(self) -> ComponentMap:
        """Component j is the stacked input u_j = (u_j[0], ..., u_j[T-1])"""
        return ComponentMap.from_domains(self.node_count, self.omega, self.input_sizes())


def generate_systems(
    net: Network,
    couplings: Sequence[Sequence[int]],
    stability: str = "unstable",
    state_dim: int = 3,
    input_dim: int = 1,
    horizon: int = 5,
    seed: int = 0,
) -> MpcSystem:
    """Standard-normal A_p, B_pj and x_p^0 with identity weights.

    Stable mode scales A_p by 0.99 / rho(A_p) when its spectral radius exceeds 1.
    """
    if stability not in STABILITY:
        raise MpcError(f"unknown stability mode {stability!r}, expected one of {STABILITY}")
    if min(state_dim, input_dim, horizon) < 1:
        raise MpcError("state_dim, input_dim and horizon must be positive")
    P = net.node_count
    if len(couplings) != P:
        raise MpcError(f"expected {P} coupling sets, got {len(couplings)}")
    omega = tuple(tuple(sorted(set(int(j) for j in o))) for o in couplings)
    for p, o in enumerate(omega):
        if p not in o:
            raise MpcError(f"node {p} is missing from its own coupling set")

    rng = _rng(seed)
    A, B, x0 = [], [], []
    for p in range(P):
        Ap = rng.standard_normal((state_dim, state_dim))
        if stability == "stable":
            radius = float(np.max(np.abs(np.linalg.eigvals(Ap))))
            if radius > 1.0:
                Ap = Ap * (0.99 / radius)
        A.append(Ap)
        B.append({j: rng.standard_normal((state_dim, input_dim)) for j in omega[p]})
        x0.append(rng.standard_normal(state_dim))

    eye_n, eye_m = np.eye(state_dim), np.eye(input_dim)
    logger.info(f"Generated {stability} MPC systems: {P} nodes, n={state_dim}, m={input_dim}, T={horizon}")
    return MpcSystem(
        omega=omega,
        horizon=horizon,
        A=tuple(A),
        B=tuple(B),
        Q=tuple(eye_n for _ in range(P)),
        Qf=tuple(eye_n for _ in range(P)),
        R=tuple(eye_m for _ in range(P)),
        x0=tuple(x0),
        seed=seed,
        stability=stability,
    )


@dataclass(eq=False)
class CondensedMpc:
    """f_p(u_{Omega_p}) = u'E_p u + w_p'u + constant_p, inputs stacked in ascending j"""

    system: MpcSystem
    cmap: ComponentMap
    E: List[np.ndarray] = field(default_factory=list)
    w: List[np.ndarray] = field(default_factory=list)
    constants: List[float] = field(default_factory=list)
    C: List[np.ndarray] = field(default_factory=list)
    D0: List[np.ndarray] = field(default_factory=list)

    def local_problems(self) -> List[QuadraticLocalProblem]:
        sizes = self.cmap.sizes
        return [
            QuadraticLocalProblem(p, self.system.omega[p], sizes, self.E[p], self.w[p], self.constants[p])
            for p in range(self.system.node_count)
        ]

    def objective(self, u) -> float:
        """Total condensed cost at the concatenated input u"""
        u = np.asarray(u, dtype=float)
        offsets = self.cmap.offsets
        total = 0.0
        for p, o in enumerate(self.system.omega):
            up = np.concatenate([u[offsets[j]:offsets[j] + self.cmap.sizes[j]] for j in o])
            total += float(up @ self.E[p] @ up + self.w[p] @ up + self.constants[p])
        return total


def condense(system: MpcSystem) -> CondensedMpc:
    """
    Eliminate the states: x_p = C_p u_{Omega_p} + D_p^0

    Block row t of C_p (t = 0..T, row 0 zero) holds A_p^{t-1-s} B_pj in the
    column block of u_j[s] for s < t. E_p is R_p on node p's own block plus
    C_p'Q_p C_p, and w_p = 2 C_p'Q_p D_p^0.
    """
    T = system.horizon
    cmap = system.component_map()
    condensed = CondensedMpc(system=system, cmap=cmap)

    for p, omega in enumerate(system.omega):
        Ap = system.A[p]
        n = Ap.shape[0]
        powers = [np.eye(n)]
        for _ in range(T):
            powers.append(powers[-1] @ Ap)

        widths = [system.input_dim(j) for j in omega]
        starts = np.concatenate(([0], np.cumsum([m * T for m in widths]))).astype(int)
        C = np.zeros((n * (T + 1), int(starts[-1])))
        for t in range(1, T + 1):
            for s in range(t):
                for k, j in enumerate(omega):
                    Bpj = system.B[p][j]
                    if Bpj.shape != (n, widths[k]):
                        raise MpcError(f"B[{p}][{j}] has shape {Bpj.shape}, expected {(n, widths[k])}")
                    col = starts[k] + s * widths[k]
                    C[t * n:(t + 1) * n, col:col + widths[k]] = powers[t - 1 - s] @ Bpj
        D0 = np.concatenate([powers[t] @ system.x0[p] for t in range(T + 1)])

        Qp = np.zeros((n * (T + 1), n * (T + 1)))
        for t in range(T):
            Qp[t * n:(t + 1) * n, t * n:(t + 1) * n] = system.Q[p]
        Qp[T * n:, T * n:] = system.Qf[p]

        own = omega.index(p)
        E = C.T @ Qp @ C
        E[starts[own]:starts[own + 1], starts[own]:starts[own + 1]] += np.kron(np.eye(T), system.R[p])
        E = 0.5 * (E + E.T)

        condensed.C.append(C)
        condensed.D0.append(D0)
        condensed.E.append(E)
        condensed.w.append(2.0 * C.T @ Qp @ D0)
        condensed.constants.append(float(D0 @ Qp @ D0))
    return condensed


def rollout_cost(system: MpcSystem, u) -> float:
    """Cost sum_p u_p'R_p u_p + x_p'Q_p x_p by simulating the dynamics"""
    T = system.horizon
    cmap = system.component_map()
    offsets = cmap.offsets
    inputs = [np.asarray(u[offsets[j]:offsets[j] + cmap.sizes[j]]).reshape(T, -1) for j in range(system.node_count)]
    total = 0.0
    for p in range(system.node_count):
        x = system.x0[p].copy()
        for t in range(T):
            total += float(x @ system.Q[p] @ x) + float(inputs[p][t] @ system.R[p] @ inputs[p][t])
            x = system.A[p] @ x + sum(system.B[p][j] @ inputs[j][t] for j in system.omega[p])
        total += float(x @ system.Qf[p] @ x)
    return total


def solve_local_mpc(p: int, v: Dict[int, np.ndarray], weights: Dict[int, float], condensed: CondensedMpc):
    """Node p's subproblem: a symmetric positive-definite linear solve"""
    problem = QuadraticLocalProblem(
        p, condensed.system.omega[p], condensed.cmap.sizes, condensed.E[p], condensed.w[p], condensed.constants[p]
    )
    return problem.solve(v, weights)


def centralized_mpc_reference(condensed: CondensedMpc) -> np.ndarray:
    """u* from the global linear system 2 H u = -sum w"""
    u = centralized_quadratic(condensed.local_problems(), condensed.cmap.sizes)
    logger.info(f"Centralized MPC reference: {u.size} inputs")
    return u


def _rows(matrix) -> List[str]:
    matrix = np.atleast_2d(matrix)
    return [" ".join(f"{v:.17g}" for v in row) for row in matrix]


def write_mpc_system(system: MpcSystem, path):
    """Plain-text dump: header, then per node its coupling set and dense blocks row-major"""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"mpc {system.node_count} {system.horizon} {system.stability} {system.seed}\n")
        for p in range(system.node_count):
            f.write(f"node {p} {system.state_dim(p)} {system.input_dim(p)}\n")
            f.write("omega " + " ".join(str(j) for j in system.omega[p]) + "\n")
            blocks = [("A", system.A[p]), ("Q", system.Q[p]), ("Qf", system.Qf[p]), ("R", system.R[p])]
            blocks += [(f"B {j}", system.B[p][j]) for j in system.omega[p]]
            for name, matrix in blocks:
                f.write(name + "\n")
                for row in _rows(matrix):
                    f.write(row + "\n")
            f.write("x0\n" + _rows(system.x0[p])[0] + "\n")


def read_mpc_system(path) -> MpcSystem:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.split() for line in f if line.strip()]
    try:
        tag, P, T, stability, seed = lines[0]
        if tag != "mpc":
            raise MpcError(f"{path}: not an MPC system")
        P, T = int(P), int(T)
        pos = 1
        omega, A, B, Q, Qf, R, x0 = [], [], [], [], [], [], []

        def matrix(rows):
            nonlocal pos
            block = np.array([[float(v) for v in lines[pos + r]] for r in range(rows)])
            pos += rows
            return block

        for p in range(P):
            _, _, n, m = lines[pos]
            n, m = int(n), int(m)
            omega.append(tuple(int(j) for j in lines[pos + 1][1:]))
            pos += 2
            blocks = {}
            for _ in range(4 + len(omega[-1])):
                name = " ".join(lines[pos])
                pos += 1
                blocks[name] = matrix(m if name == "R" else n)
            A.append(blocks["A"])
            Q.append(blocks["Q"])
            Qf.append(blocks["Qf"])
            R.append(blocks["R"])
            B.append({j: blocks[f"B {j}"] for j in omega[-1]})
            pos += 1
            x0.append(np.array([float(v) for v in lines[pos]]))
            pos += 1
    except (ValueError, IndexError, KeyError) as e:
        raise MpcError(f"{path}: malformed MPC system ({e})")
    return MpcSystem(
        omega=tuple(omega), horizon=T, A=tuple(A), B=tuple(B), Q=tuple(Q), Qf=tuple(Qf), R=tuple(R),
        x0=tuple(x0), seed=int(seed), stability=stability,
    )
