"""
Result files
One CSV per algorithm and a JSON summary per experiment
"""
import csv
import json
import os
from typing import Dict, Iterable, List

from harness.metrics import trace_rows
from utils.logger import logger

CSV_HEADER = ("algorithm", "cs", "relative_error", "payload_cumulative")


def write_trace_csv(trace, path) -> str:
    """Rows in CS order; errors printed with 17 significant digits"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in trace_rows(trace):
            writer.writerow((row.algorithm, row.cs, f"{row.relative_error:.17g}", row.payload_cumulative))
    return str(path)


def read_trace_csv(path) -> List[Dict]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return [
            {
                "algorithm": r["algorithm"],
                "cs": int(r["cs"]),
                "relative_error": float(r["relative_error"]),
                "payload_cumulative": int(r["payload_cumulative"]),
            }
            for r in csv.DictReader(f)
        ]


def experiment_dir(out_dir, name: str) -> str:
    path = os.path.join(out_dir, name)
    os.makedirs(path, exist_ok=True)
    return path


def write_json(data: Dict, path) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return str(path)


def write_outputs(out_dir, name: str, traces: Iterable, summary: Dict) -> List[str]:
    """Write <out>/<name>/<algorithm>.csv per run and <out>/<name>/summary.json"""
    target = experiment_dir(out_dir, name)
    written = [write_trace_csv(trace, os.path.join(target, f"{trace.algorithm}.csv")) for trace in traces]
    written.append(write_json(summary, os.path.join(target, "summary.json")))
    logger.info(f"Results saved to {target} ({len(written)} files)")
    return written
