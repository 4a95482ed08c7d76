# -*- coding: utf-8 -*-
"""Brute-force references for tests: an exhaustive temperature grid search
and a plain-Python scan of the exit rule."""
import math
from typing import Any, List, Sequence

import numpy as np
from scipy.special import logsumexp

from pyoffload.cascade import ExitDecision
from pyoffload.error import ProgrammingError
from pyoffload.model import LogitRecord


def dense_temperature_grid(
    t_min: float = 0.05, t_max: float = 20.0, step: float = 1e-3
) -> np.ndarray:
    return np.arange(round((t_max - t_min) / step) + 1) * step + t_min


def brute_force_temperature(
    logits: Any, labels: Any, t_grid: Sequence[float], max_block: int = 1 << 22
) -> float:
    """Grid point with the lowest mean NLL; the first one wins a tie.

    Temperatures are scanned in blocks of at most ``max_block`` scaled logits."""
    grid = np.asarray(t_grid, dtype=np.float64)
    if grid.size == 0:
        raise ProgrammingError("Temperature grid must not be empty.")
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    picked = z[np.arange(len(y)), y]
    chunksize = max(1, max_block // max(z.size, 1))
    losses: List[np.ndarray] = []
    for start in range(0, grid.size, chunksize):
        t = grid[start : start + chunksize, np.newaxis, np.newaxis]
        scaled = z[np.newaxis] / t
        log_norm = logsumexp(scaled, axis=2)
        losses.append(np.mean(log_norm - picked[np.newaxis] / t[:, :, 0], axis=1))
    return float(grid[int(np.argmin(np.concatenate(losses)))])


def _rule_of(policy: Any) -> Any:
    rule = policy.confidence_rule
    return getattr(rule, "name", rule), getattr(rule, "threshold", None)


def brute_force_cascade(record: LogitRecord, policy: Any) -> ExitDecision:
    """Scan the exits one at a time with scalar math only."""
    name, threshold = _rule_of(policy)
    threshold = policy.p_tar if threshold is None else threshold
    temperatures = list(policy.temperatures)
    vectors = [[float(v) for v in row] for row in record.logits]
    for i, (vector, temperature) in enumerate(zip(vectors, temperatures), start=1):
        scaled = [v / temperature for v in vector]
        top = max(scaled)
        weights = [math.exp(v - top) for v in scaled]
        total = sum(weights)
        probs = [w / total for w in weights]
        predicted = 0
        for c in range(1, len(probs)):
            if probs[c] > probs[predicted]:
                predicted = c
        if name == "entropy":
            entropy = -sum(p * math.log(p) for p in probs if p > 0)
            confidence = min(max(1.0 - entropy / math.log(len(probs)), 0.0), 1.0)
        else:
            confidence = probs[predicted]
        if i == len(vectors) or confidence >= threshold:
            return ExitDecision(
                sample_id=record.sample_id,
                exit_index=i,
                predicted_class=predicted,
                confidence=confidence,
                on_device=i <= policy.device_exit_count,
                label=record.label,
            )
    raise ProgrammingError("Record has no exits.")  # pragma: no cover
