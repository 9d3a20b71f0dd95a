"""
Experiment runner
Builds the network and problem of an experiment and executes single
algorithm runs against it
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from engine.algorithms import run_algorithm1, run_algorithm2, run_algorithm3, run_consensus
from engine.state import EngineConfig, RunTrace
from graph.coloring import Coloring, greedy_color
from graph.components import ComponentMap, non_connected_components
from graph.network import Network, generate_barabasi_albert, load_edge_list, network_stats
from graph.steiner import augment_components, steiner_summary
from harness.experiment import AlgorithmSpec, ExperimentConfig, GraphSpec, ProblemSpec
from problems.mpc import CondensedMpc, centralized_mpc_reference, condense, generate_couplings, generate_systems
from problems.nesterov import nesterov_dual_baseline, nesterov_primal_baseline
from problems.netflow import FlowInstance, centralized_reference, generate_flow_instance
from utils.logger import logger


@dataclass(eq=False)
class ProblemBundle:
    """What the distributed runs need, plus the family-specific instance"""

    family: str
    cmap: ComponentMap
    problems: List
    flow: Optional[FlowInstance] = None
    mpc: Optional[CondensedMpc] = None


@dataclass(eq=False)
class ExperimentContext:
    config: ExperimentConfig
    net: Network
    coloring: Coloring
    bundle: ProblemBundle
    reference: Optional[np.ndarray] = None
    stats: Dict = field(default_factory=dict)


def build_network(spec: GraphSpec, seed: int) -> Network:
    if spec.source == "file":
        return load_edge_list(spec.path)
    return generate_barabasi_albert(spec.nodes, spec.attach, seed)


def build_problem(spec: ProblemSpec, net: Network, seed: int) -> ProblemBundle:
    """Flow instance or condensed MPC on the network, seeded independently of the graph"""
    if spec.is_flow:
        kind = "quadratic" if spec.family == "flow_quadratic" else "delay"
        instance = generate_flow_instance(net, spec.commodities, seed, kind)
        return ProblemBundle(spec.family, instance.component_map(), instance.local_problems(), flow=instance)

    omega = generate_couplings(net, spec.pattern, spec.reach, seed)
    system = generate_systems(
        net, omega, spec.stability, spec.state_dim, spec.input_dim, spec.horizon, seed + 1
    )
    condensed = condense(system)
    return ProblemBundle(spec.family, condensed.cmap, condensed.local_problems(), mpc=condensed)


def compute_reference(bundle: ProblemBundle) -> np.ndarray:
    if bundle.flow is not None:
        return centralized_reference(bundle.flow)
    return centralized_mpc_reference(bundle.mpc)


def problem_stats(net: Network, cmap: ComponentMap) -> Dict:
    """Component counts, and the Steiner augmentation figures when some component is non-connected"""
    stats = {
        "components": int(cmap.n_components),
        "variable_size": int(cmap.total_size),
        "non_connected_components": len(non_connected_components(net, cmap)),
    }
    if stats["non_connected_components"]:
        stats.update(steiner_summary(augment_components(net, cmap)))
    return stats


def prepare_experiment(config: ExperimentConfig) -> ExperimentContext:
    """Network, coloring, problem and (optionally) the centralized solution"""
    net = build_network(config.graph, config.seed)
    coloring = greedy_color(net)
    bundle = build_problem(config.problem, net, config.seed + 1)
    reference = compute_reference(bundle) if config.reference == "centralized" else None
    stats = network_stats(net, coloring.num_colors)
    stats.update(problem_stats(net, bundle.cmap))
    return ExperimentContext(config, net, coloring, bundle, reference, stats)


def run_spec(
    ctx: ExperimentContext,
    spec: AlgorithmSpec,
    rho: Optional[float] = None,
    lipschitz: Optional[float] = None,
    target_error: Optional[float] = None,
    max_cs: Optional[int] = None,
) -> RunTrace:
    """
    Run one configured algorithm on a prepared experiment

    Args:
        ctx: prepared experiment
        spec: algorithm entry of the config
        rho, lipschitz: overrides of the configured parameter (used by sweeps)
        target_error: override of the experiment's stopping error
        max_cs: override of the experiment's CS cap

    Returns:
        RunTrace of the run
    """
    config = ctx.config
    target = config.target_error if target_error is None else target_error
    max_cs = config.max_cs if max_cs is None else max_cs

    if spec.kind == "nesterov":
        L = lipschitz if lipschitz is not None else spec.lipschitz
        if ctx.bundle.flow is not None:
            return nesterov_dual_baseline(
                ctx.bundle.flow,
                L=L,
                max_cs=max_cs,
                reference=ctx.reference,
                target_error=target,
                tolerance=config.tolerance,
                name=spec.name,
            )
        return nesterov_primal_baseline(
            ctx.net,
            ctx.bundle.cmap,
            ctx.bundle.problems,
            L=L,
            max_cs=max_cs,
            reference=ctx.reference,
            target_error=target,
            tolerance=config.tolerance,
            name=spec.name,
        )

    engine = EngineConfig(
        rho=rho if rho is not None else spec.rho,
        max_cs=max_cs,
        tolerance=config.tolerance,
        target_error=target,
    )
    cmap = ctx.bundle.cmap.global_mode() if spec.global_variable else ctx.bundle.cmap
    problems = ctx.bundle.problems
    if spec.kind == "alg1":
        trace, _ = run_algorithm1(ctx.net, ctx.coloring, cmap, problems, engine, ctx.reference, name=spec.name)
    elif spec.kind == "consensus":
        trace, _ = run_consensus(ctx.net, cmap, problems, engine, ctx.reference, name=spec.name)
    elif spec.kind == "alg2":
        trace, _ = run_algorithm2(ctx.net, cmap, problems, engine, ctx.reference, augment=spec.augment, name=spec.name)
    else:
        trace, _ = run_algorithm3(ctx.net, ctx.coloring, cmap, problems, engine, ctx.reference, name=spec.name)
    return trace


def failed_trace(name: str, error: Exception) -> RunTrace:
    logger.error(f"{name} failed: {type(error).__name__}: {error}")
    return RunTrace(algorithm=name, status="failed", message=f"{type(error).__name__}: {error}")
