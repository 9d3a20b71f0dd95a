"""
Experiment Workflow
Orchestrates one experiment: network -> problem -> reference -> runs -> files
"""
from typing import Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from config import Config
from engine.state import EngineError
from harness.experiment import ExperimentConfig
from harness.metrics import MetricError, summarize
from harness.output import write_outputs
from harness.runner import (
    ExperimentContext,
    build_network,
    build_problem,
    compute_reference,
    failed_trace,
    problem_stats,
    run_spec,
)
from graph.coloring import greedy_color
from graph.network import network_stats
from problems.errors import FlowError, MpcError
from utils.logger import logger

SOLVER_ERRORS = (EngineError, FlowError, MpcError, MetricError)


class ExperimentState(TypedDict):
    """State shared across the pipeline stages"""
    config: ExperimentConfig
    out_dir: str
    net: object
    coloring: object
    bundle: object
    reference: Optional[object]
    stats: Dict
    traces: List
    files: List[str]
    current_step: str
    errors: List[str]
    failures: List[str]
    failure_kind: Optional[str]


def _failure(state: ExperimentState, stage: str, kind: str, error: Exception) -> Dict:
    """Record a stage error; the first failure decides whether the inputs or the solvers were at fault"""
    return {
        "errors": state.get("errors", []) + [f"{stage}: {error}"],
        "failure_kind": state.get("failure_kind") or kind,
    }


class ExperimentWorkflow:
    """Runs the configured algorithms on one generated instance"""

    def __init__(self):
        self.graph = self._build_graph()

    def _build_graph(self) -> StateGraph:
        workflow = StateGraph(ExperimentState)

        workflow.add_node("build_network", self._network_node)
        workflow.add_node("build_problem", self._problem_node)
        workflow.add_node("reference", self._reference_node)
        workflow.add_node("run_algorithms", self._algorithms_node)
        workflow.add_node("write_outputs", self._outputs_node)

        workflow.set_entry_point("build_network")
        workflow.add_edge("build_network", "build_problem")
        workflow.add_edge("build_problem", "reference")
        workflow.add_edge("reference", "run_algorithms")
        workflow.add_edge("run_algorithms", "write_outputs")
        workflow.add_edge("write_outputs", END)

        return workflow.compile()

    def _network_node(self, state: ExperimentState) -> Dict:
        """Step 1: Communication network and its coloring"""
        logger.info("Step 1/5: Building communication network")
        config = state["config"]
        try:
            net = build_network(config.graph, config.seed)
            coloring = greedy_color(net)
            stats = network_stats(net, coloring.num_colors)
            logger.info(f"Network ready: {stats['nodes']} nodes, {stats['edges']} edges, {stats['colors']} colors")
            return {"net": net, "coloring": coloring, "stats": stats, "current_step": "network_complete"}
        except Exception as e:
            logger.error(f"Network error: {str(e)}")
            return {"net": None, **_failure(state, "network", "config", e)}

    def _problem_node(self, state: ExperimentState) -> Dict:
        """Step 2: Problem instance and component map"""
        logger.info("Step 2/5: Generating problem instance")
        if state.get("net") is None:
            return {"bundle": None}
        config = state["config"]
        try:
            bundle = build_problem(config.problem, state["net"], config.seed + 1)
            stats = dict(state.get("stats", {}))
            stats.update(problem_stats(state["net"], bundle.cmap))
            logger.info(
                f"Problem ready: {config.problem.family}, {stats['components']} components, "
                f"{stats['non_connected_components']} non-connected"
            )
            return {"bundle": bundle, "stats": stats, "current_step": "problem_complete"}
        except Exception as e:
            logger.error(f"Problem error: {str(e)}")
            return {"bundle": None, **_failure(state, "problem", "config", e)}

    def _reference_node(self, state: ExperimentState) -> Dict:
        """Step 3: Centralized solution for relative errors"""
        logger.info("Step 3/5: Computing centralized reference")
        if state.get("bundle") is None or state["config"].reference == "none":
            return {"reference": None}
        try:
            reference = compute_reference(state["bundle"])
            return {"reference": reference, "current_step": "reference_complete"}
        except Exception as e:
            logger.error(f"Reference error: {str(e)}")
            return {"reference": None, **_failure(state, "reference", "solver", e)}

    def _algorithms_node(self, state: ExperimentState) -> Dict:
        """Step 4: One run per configured algorithm; a failed run does not stop the others"""
        logger.info("Step 4/5: Running algorithms")
        if state.get("bundle") is None:
            return {"traces": []}
        config = state["config"]
        ctx = ExperimentContext(
            config, state["net"], state["coloring"], state["bundle"], state.get("reference"), state.get("stats", {})
        )
        traces, errors, failures = [], list(state.get("errors", [])), list(state.get("failures", []))
        for spec in config.algorithms:
            try:
                trace = run_spec(ctx, spec)
            except SOLVER_ERRORS as e:
                trace = failed_trace(spec.name, e)
                errors.append(f"{spec.name}: {e}")
                failures.append(spec.name)
            traces.append(trace)
        update = {"traces": traces, "errors": errors, "failures": failures, "current_step": "runs_complete"}
        if failures and state.get("failure_kind") is None:
            update["failure_kind"] = "solver"
        return update

    def _outputs_node(self, state: ExperimentState) -> Dict:
        """Step 5: CSVs and summary"""
        logger.info("Step 5/5: Writing results")
        traces = state.get("traces", [])
        summary = build_summary(state["config"], traces, state.get("stats", {}), state.get("errors", []))
        try:
            files = write_outputs(state["out_dir"], state["config"].name, traces, summary)
            return {"files": files, "current_step": "complete"}
        except OSError as e:
            logger.error(f"Output error: {str(e)}")
            return {"files": [], "errors": state.get("errors", []) + [f"output: {e}"]}

    def run_experiment(self, config: ExperimentConfig, out_dir: str = None) -> Dict:
        """Execute the pipeline"""
        logger.info("=" * 60)
        logger.info(f"Starting experiment {config.name} (seed {config.seed})")
        logger.info("=" * 60)

        initial_state: ExperimentState = {
            "config": config,
            "out_dir": out_dir or Config.OUTPUT_DIR,
            "net": None,
            "coloring": None,
            "bundle": None,
            "reference": None,
            "stats": {},
            "traces": [],
            "files": [],
            "current_step": "initialized",
            "errors": [],
            "failures": [],
            "failure_kind": None,
        }
        final_state = self.graph.invoke(initial_state)
        complete = final_state.get("bundle") is not None and not final_state["failures"]
        logger.info("=" * 60)
        logger.info(f"Experiment {config.name} finished: {len(final_state['traces'])} runs, "
                    f"{len(final_state['errors'])} errors")
        logger.info("=" * 60)
        return {
            "success": complete and not final_state["errors"],
            "name": config.name,
            "traces": final_state["traces"],
            "stats": final_state["stats"],
            "files": final_state["files"],
            "failures": final_state["failures"],
            "errors": final_state["errors"],
            "failure_kind": final_state.get("failure_kind"),
        }


def build_summary(config: ExperimentConfig, traces, stats: Dict, errors: List[str]) -> Dict:
    return {
        "name": config.name,
        "seed": config.seed,
        "family": config.problem.family,
        "network": stats,
        "thresholds": list(Config.THRESHOLDS),
        "algorithms": {trace.algorithm: summarize(trace) for trace in traces},
        "errors": errors,
    }


def create_workflow() -> ExperimentWorkflow:
    """Factory function to create a workflow instance"""
    return ExperimentWorkflow()


def run_experiment(config: ExperimentConfig, out_dir: str = None) -> Dict:
    return create_workflow().run_experiment(config, out_dir)
