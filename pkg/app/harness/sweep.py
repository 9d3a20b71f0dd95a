"""
Parameter sweeps
Grid search of rho (or L for the gradient baselines) minimizing the CS count to
a target error, with a precision certificate for the chosen value
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from engine.state import EngineError
from harness.experiment import ConfigError, ExperimentConfig
from harness.runner import ExperimentContext, failed_trace, prepare_experiment, run_spec
from problems.errors import FlowError, MpcError
from utils.logger import logger

FAILED = ("diverged", "failed")


@dataclass
class SweepResult:
    algorithm: str
    parameter: str
    values: List[float]
    cs: List[Optional[int]]
    statuses: List[str]
    best: Optional[float] = None
    best_cs: Optional[int] = None
    certified: bool = False
    precision: Optional[float] = None
    all_diverged: bool = False
    target: float = 1e-4
    bracket: Optional[Tuple[float, float]] = None

    def to_dict(self) -> Dict:
        return {
            "algorithm": self.algorithm,
            "parameter": self.parameter,
            "target": self.target,
            "grid": [{"value": v, "cs": c, "status": s} for v, c, s in zip(self.values, self.cs, self.statuses)],
            "best": self.best,
            "best_cs": self.best_cs,
            "certified": self.certified,
            "precision": self.precision,
            "bracket": list(self.bracket) if self.bracket is not None else None,
            "all_diverged": self.all_diverged,
        }


def select_best(result: SweepResult) -> SweepResult:
    """
    Fill in the best grid value and its certificate

    The best value has the fewest CS to the target (ties go to the smaller
    value). It is certified when both grid neighbors are strictly worse;
    the neighbors then bracket it and the precision is the distance to the
    nearer one, so best +- precision stays inside the bracket.
    """
    result.all_diverged = bool(result.statuses) and all(s in FAILED for s in result.statuses)
    reached = [i for i, c in enumerate(result.cs) if c is not None]
    if not reached:
        return result
    i = min(reached, key=lambda k: (result.cs[k], result.values[k]))
    result.best, result.best_cs = result.values[i], result.cs[i]

    def worse(k: int) -> bool:
        return result.cs[k] is None or result.cs[k] > result.best_cs

    if 0 < i < len(result.values) - 1 and worse(i - 1) and worse(i + 1):
        result.certified = True
        result.bracket = (result.values[i - 1], result.values[i + 1])
        result.precision = min(result.values[i] - result.values[i - 1], result.values[i + 1] - result.values[i])
    return result


def parameter_sweep(
    config: ExperimentConfig,
    param_grid: Optional[Dict[str, Sequence[float]]] = None,
    target: Optional[float] = None,
    ctx: Optional[ExperimentContext] = None,
) -> Dict[str, SweepResult]:
    """
    Run every algorithm of the grid at every grid value on one instance

    Args:
        config: experiment; its [sweep] section is the default grid and target
        param_grid: algorithm name -> values of rho (or L for nesterov)
        target: relative error defining the CS count
        ctx: an already prepared experiment to reuse

    Returns:
        SweepResult per algorithm name
    """
    if param_grid is None:
        if config.sweep is None or not config.sweep.grid:
            raise ConfigError("no sweep grid given and the config has no [sweep] section")
        param_grid = config.sweep.grid
    if target is None:
        target = config.sweep.target if config.sweep is not None else 1e-4
    for name, values in param_grid.items():
        if not values:
            raise ConfigError(f"empty sweep grid for {name}")
    if config.reference != "centralized":
        raise ConfigError("sweeps need the centralized reference")

    ctx = ctx or prepare_experiment(config)
    results = {}
    for name, values in param_grid.items():
        spec = config.algorithm(name)
        parameter = "lipschitz" if spec.kind == "nesterov" else "rho"
        result = SweepResult(algorithm=name, parameter=parameter, values=sorted(float(v) for v in values),
                             cs=[], statuses=[], target=target)
        for value in result.values:
            logger.info(f"Sweep {name}: {parameter}={value:g}")
            try:
                trace = run_spec(ctx, spec, target_error=target, **{parameter: value})
            except (EngineError, FlowError, MpcError, ValueError) as e:
                trace = failed_trace(name, e)
            result.cs.append(trace.cs_to(target))
            result.statuses.append(trace.status)
        results[name] = select_best(result)
        if result.all_diverged:
            logger.warning(f"Sweep {name}: every run diverged")
        else:
            logger.info(f"Sweep {name}: best {parameter}={result.best} with {result.best_cs} CS "
                        f"(certified: {result.certified})")
    return results

