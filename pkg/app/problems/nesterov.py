"""
Accelerated gradient baselines
Nesterov's method on the flow-conservation dual (each node sending its single
multiplier) and on the primal of quadratic problems with star-shaped
components (each owner exchanging its copies with the hub); one CS per iteration
"""
import time
from typing import Callable, Optional, Sequence

import numpy as np

from config import Config
from engine.local import assemble_quadratic
from engine.state import CsRecord, RunTrace
from graph.components import ComponentMap, star_hubs
from graph.network import GraphError, Network
from harness.metrics import relative_error
from problems.errors import FlowError, MpcError
from problems.netflow import FlowInstance, delay_arc_response
from utils.logger import logger


def nesterov_lipschitz(instance: FlowInstance) -> float:
    """Exact Lipschitz constant lambda_max(BB') of the quadratic dual gradient"""
    if instance.kind != "quadratic":
        raise FlowError("the delay dual has no global Lipschitz constant; supply one")
    laplacian = (instance.incidence @ instance.incidence.T).toarray()
    return float(np.linalg.eigvalsh(laplacian)[-1])


def primal_response(instance: FlowInstance, lam) -> np.ndarray:
    """x(lam): per-arc minimizer of phi(x) + (B'lam)_arc x"""
    t = instance.incidence.T @ lam
    if instance.kind == "quadratic":
        return instance.weights - t
    return delay_arc_response(t, instance.weights, instance.caps())


def dual_gradient(instance: FlowInstance, lam) -> np.ndarray:
    return instance.incidence @ primal_response(instance, lam) - instance.supply


def _accelerated(
    name: str,
    step: Callable[[np.ndarray], np.ndarray],
    estimate: Callable[[np.ndarray], np.ndarray],
    size: int,
    payload: int,
    max_cs: int,
    reference,
    target_error: Optional[float],
    tolerance: float,
    blowup: str,
) -> RunTrace:
    """Shared loop: iterate = step(extrapolated point), errors measured on estimate(iterate)"""
    point = np.zeros(size)
    y = np.zeros(size)
    t_k = 1.0
    x = estimate(point)
    trace = RunTrace(algorithm=name)
    cumulative = 0
    start = time.perf_counter()

    for cs in range(1, max_cs + 1):
        point_next = step(y)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        y = point_next + ((t_k - 1.0) / t_next) * (point_next - point)
        point, t_k = point_next, t_next

        x_prev = x
        x = estimate(point)
        cumulative += payload
        finite = bool(np.all(np.isfinite(x)))
        error = relative_error(x, reference) if reference is not None and finite else None
        trace.records.append(CsRecord(cs, error, payload, cumulative, time.perf_counter() - start))

        if not finite or (error is not None and error > Config.DIVERGENCE_LIMIT):
            trace.status = "diverged"
            trace.message = blowup
            break
        if target_error is not None and error is not None and error <= target_error:
            trace.status = "converged"
            trace.message = f"target error {target_error:g} reached"
            break
        if float(np.max(np.abs(x - x_prev), initial=0.0)) < tolerance:
            trace.status = "converged"
            trace.message = "primal change below tolerance"
            break
    else:
        trace.status = "max_steps"

    logger.info(f"{name} finished: {trace.status} after {trace.cs_count} CS, final error {trace.final_error}")
    return trace


def nesterov_dual_baseline(
    instance: FlowInstance,
    L: Optional[float] = None,
    max_cs: int = None,
    reference=None,
    target_error: float = None,
    tolerance: float = None,
    name: str = "nesterov",
) -> RunTrace:
    """
    Accelerated dual ascent with constant step 1/L

    Args:
        instance: flow instance
        L: Lipschitz constant (exact by default for quadratic instances)
        max_cs: iteration cap, one CS each
        reference: centralized solution for relative errors
        target_error: stop once the relative error reaches it
        tolerance: stop once the primal estimate moves less than this

    Returns:
        RunTrace whose payload per CS is one scalar per node
    """
    if L is None:
        L = nesterov_lipschitz(instance) if instance.kind == "quadratic" else Config.DELAY_LIPSCHITZ
    if L <= 0:
        raise FlowError(f"Lipschitz constant must be positive, got {L}")
    max_cs = Config.DEFAULT_MAX_CS if max_cs is None else max_cs
    tolerance = Config.DEFAULT_TOLERANCE if tolerance is None else tolerance

    P = instance.node_count
    logger.info(f"Starting {name}: L={L:g}, {P} nodes")
    return _accelerated(
        name,
        lambda y: y + dual_gradient(instance, y) / L,
        lambda lam: primal_response(instance, lam),
        P,
        P,
        max_cs,
        reference,
        target_error,
        tolerance,
        "dual ascent blew up; L is too small",
    )


def nesterov_primal_baseline(
    net: Network,
    cmap: ComponentMap,
    problems: Sequence,
    L: Optional[float] = None,
    max_cs: int = None,
    reference=None,
    target_error: float = None,
    tolerance: float = None,
    name: str = "nesterov",
) -> RunTrace:
    """
    Accelerated gradient with constant step 1/L on sum_p f_p for quadratic f_p

    The hub of each component keeps its value; the other owners send their
    partial gradients to it and receive the update, so every owner moves its
    copies once per CS.

    Args:
        net: communication network
        cmap: component map; every component must induce a star
        problems: quadratic local problem per node (None for f_p = 0)
        L: Lipschitz constant (lambda_max of the Hessian by default)

    Returns:
        RunTrace over the concatenated variable
    """
    try:
        star_hubs(net, cmap)
    except GraphError as e:
        raise MpcError(f"the primal gradient baseline needs star-shaped components: {e}")
    if any(p is not None and not hasattr(p, "quadratic_form") for p in problems):
        raise MpcError("the primal gradient baseline needs quadratic local problems")
    H, g = assemble_quadratic(problems, cmap.sizes)
    if L is None:
        L = float(np.linalg.eigvalsh(H)[-1])
    if L <= 0:
        raise MpcError(f"Lipschitz constant must be positive, got {L}")
    max_cs = Config.DEFAULT_MAX_CS if max_cs is None else max_cs
    tolerance = Config.DEFAULT_TOLERANCE if tolerance is None else tolerance

    logger.info(f"Starting {name}: L={L:g}, {cmap.n_components} components")
    return _accelerated(
        name,
        lambda y: y - (H @ y + g) / L,
        lambda x: x,
        cmap.total_size,
        cmap.payload_per_cs(),
        max_cs,
        reference,
        target_error,
        tolerance,
        "gradient steps blew up; L is too small",
    )
