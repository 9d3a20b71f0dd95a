"""
Metrics
Relative error, CSV rows and CS-to-threshold summaries
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import Config


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricRow:
    algorithm: str
    cs: int
    relative_error: float
    payload_cumulative: int


def relative_error(estimate, reference, ordering=None) -> float:
    """
    ||x^k - x*||_inf / ||x*||_inf over the concatenated original-domain copies

    Args:
        estimate: a CopyState, or an array of copies
        reference: centralized solution x*
        ordering: for an array estimate, index of each copy into x*

    Returns:
        Relative max-norm error
    """
    reference = np.asarray(reference, dtype=float)
    scale = np.max(np.abs(reference)) if reference.size else 0.0
    if scale == 0.0:
        raise MetricError("reference solution has zero norm")

    if ordering is None and hasattr(estimate, "original_copies"):
        values = estimate.original_copies()
        ordering = estimate.layout.reference_index
    else:
        values = np.asarray(estimate, dtype=float)
        if ordering is None:
            ordering = np.arange(values.size)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values - reference[np.asarray(ordering)])) / scale)


def trace_rows(trace) -> List[MetricRow]:
    """CSV rows of a run; steps without an error value are skipped"""
    return [
        MetricRow(trace.algorithm, r.cs, r.relative_error, r.payload_cumulative)
        for r in trace.records
        if r.relative_error is not None
    ]


def cs_to_threshold(rows: Sequence[MetricRow], threshold: float) -> Optional[int]:
    """First cs whose error is at most threshold"""
    for row in rows:
        if row.relative_error <= threshold:
            return row.cs
    return None


def payload_to_threshold(rows: Sequence[MetricRow], threshold: float) -> Optional[int]:
    for row in rows:
        if row.relative_error <= threshold:
            return row.payload_cumulative
    return None


def summarize(trace, thresholds: Sequence[float] = Config.THRESHOLDS) -> Dict:
    """Status, final error and per-threshold CS and payload counts of one run"""
    rows = trace_rows(trace)
    return {
        "algorithm": trace.algorithm,
        "status": trace.status,
        "message": trace.message,
        "cs": trace.cs_count,
        "final_error": trace.final_error,
        "cs_to_threshold": {f"{t:g}": cs_to_threshold(rows, t) for t in thresholds},
        "payload_to_threshold": {f"{t:g}": payload_to_threshold(rows, t) for t in thresholds},
    }
