"""
PartialADMM - distributed optimization over partial variables
Command-line entry point: generate, run, sweep, oracle
"""

import argparse
import csv
import os
import sys

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import Config
from graph.network import GraphError, write_edge_list
from harness.experiment import ConfigError, load_experiment
from harness.output import experiment_dir, write_json
from harness.runner import build_network, build_problem, compute_reference
from harness.sweep import parameter_sweep
from problems.errors import FlowError, MpcError
from problems.mpc import write_mpc_system
from problems.netflow import write_flow_instance
from engine.state import EngineError
from utils.logger import logger
from workflow import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2


def load_config(args):
    """Experiment config with the --seed override applied"""
    config = load_experiment(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def cmd_generate(args) -> int:
    """Write the network edge list and the problem instance"""
    config = load_config(args)
    net = build_network(config.graph, config.seed)
    bundle = build_problem(config.problem, net, config.seed + 1)
    target = experiment_dir(args.out, config.name)

    write_edge_list(net, os.path.join(target, "network.txt"))
    if bundle.flow is not None:
        write_flow_instance(bundle.flow, os.path.join(target, "instance.txt"))
    else:
        write_mpc_system(bundle.mpc.system, os.path.join(target, "instance.txt"))
    print(f"Instance written to {target}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args)
    results = run_experiment(config, args.out)
    display_results(results)
    if results["failure_kind"] == "config":
        return EXIT_CONFIG
    if results["failure_kind"] == "solver" or results["failures"] or not results["traces"]:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args)
    results = parameter_sweep(config)
    target = experiment_dir(args.out, config.name)
    write_json({name: r.to_dict() for name, r in results.items()}, os.path.join(target, "sweep.json"))

    print("\n" + "=" * 60)
    print(f"SWEEP: {config.name}")
    print("-" * 60)
    for name, r in results.items():
        if r.all_diverged:
            print(f"   {name}: every run diverged")
        elif r.best is None:
            print(f"   {name}: no value reached {r.target:g}")
        else:
            cert = f"precision {r.precision:g}" if r.certified else "no certificate"
            print(f"   {name}: {r.parameter}={r.best:g}, {r.best_cs} CS to {r.target:g} ({cert})")
    print()
    return EXIT_OK


def cmd_oracle(args) -> int:
    """Write the centralized solution, one value per line"""
    config = load_config(args)
    net = build_network(config.graph, config.seed)
    bundle = build_problem(config.problem, net, config.seed + 1)
    reference = compute_reference(bundle)
    target = experiment_dir(args.out, config.name)
    path = os.path.join(target, "reference.csv")
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("index", "value"))
        for i, value in enumerate(reference):
            writer.writerow((i, f"{value:.17g}"))
    print(f"Reference solution ({len(reference)} entries) saved to: {path}")
    return EXIT_OK


def display_results(results: dict):
    """Display CS-to-threshold counts per algorithm"""
    print("\n" + "=" * 60)
    print(f"EXPERIMENT: {results['name']}")
    print("=" * 60)

    stats = results.get("stats") or {}
    if stats:
        print(f"   Nodes: {stats.get('nodes')}  Edges: {stats.get('edges')}  Colors: {stats.get('colors')}")
        if stats.get("non_connected_components"):
            print(f"   Non-connected components: {stats['non_connected_components']}")

    thresholds = Config.THRESHOLDS
    print("\n" + "-" * 60)
    print(f"   {'algorithm':<14}{'status':<12}" + "".join(f"{t:>10g}" for t in thresholds))
    for trace in results["traces"]:
        counts = "".join(f"{str(trace.cs_to(t) or '-'):>10}" for t in thresholds)
        print(f"   {trace.algorithm:<14}{trace.status:<12}{counts}")
    print()

    if results.get("files"):
        print(f"Results saved to: {os.path.dirname(results['files'][0])}")

    # Warnings (if any)
    if results.get("errors"):
        print("\nWARNINGS:")
        for error in results["errors"]:
            print(f"   • {error}")
        print()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partial-admm", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": (cmd_generate, "emit the network and problem instance"),
        "run": (cmd_run, "run the configured algorithms and write CSVs"),
        "sweep": (cmd_sweep, "grid-search rho / L per algorithm"),
        "oracle": (cmd_oracle, "emit the centralized reference solution"),
    }
    for name, (handler, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
        p.add_argument("--out", default=Config.OUTPUT_DIR, help="output directory")
        p.add_argument("--verbose", action="store_true", help="log every communication step")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    """Main function"""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logger.setLevel("DEBUG")
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return args.handler(args)
    except (ConfigError, GraphError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineError, FlowError, MpcError) as e:
        logger.exception("Solver failure")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
