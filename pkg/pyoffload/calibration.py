# -*- coding: utf-8 -*-
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_softmax
from scipy.special import softmax as _softmax

from pyoffload.error import DataError, ProgrammingError
from pyoffload.model import TraceDataset

_logger = logging.getLogger(__name__)  # type: ignore

# Probabilities are floored at 1e-300 inside the log.
PROBABILITY_FLOOR: float = 1e-300
LOG_PROBABILITY_FLOOR: float = math.log(PROBABILITY_FLOOR)


def _check_logits(logits: Any) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim < 1 or z.shape[-1] < 2:
        raise ProgrammingError("Logit vectors need at least 2 components.")
    if not np.all(np.isfinite(z)):
        raise ProgrammingError("Logits must be finite.")
    return z


def _check_temperature(temperature: float) -> float:
    if not math.isfinite(temperature) or temperature <= 0:
        raise ProgrammingError(
            f"Temperature must be positive and finite, got {temperature}."
        )
    return float(temperature)


def softmax(logits: Any) -> np.ndarray:
    """Softmax along the last axis, shifted by the maximum for stability."""
    return np.asarray(_softmax(_check_logits(logits), axis=-1))


def scaled_softmax(logits: Any, temperature: float) -> np.ndarray:
    temperature = _check_temperature(temperature)
    return np.asarray(_softmax(_check_logits(logits) / temperature, axis=-1))


def _log_likelihoods(
    logits: np.ndarray, labels: np.ndarray, temperature: float
) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        log_probs = log_softmax(logits / temperature, axis=1)
    picked = log_probs[np.arange(len(labels)), labels]
    picked = np.where(np.isfinite(picked), picked, LOG_PROBABILITY_FLOOR)
    return np.maximum(picked, LOG_PROBABILITY_FLOOR)


def _check_samples(logits: Any, labels: Any) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ProgrammingError("Expected a non-empty (N, K) logit matrix.")
    if y.shape != (z.shape[0],):
        raise ProgrammingError(
            f"Got {z.shape[0]} logit vectors but {y.shape[0] if y.ndim else 0} labels."
        )
    _check_logits(z)
    if not np.issubdtype(y.dtype, np.integer):
        raise DataError("Labels must be integers.")
    if np.any(y < 0) or np.any(y >= z.shape[1]):
        raise DataError(f"Labels must lie in [0, {z.shape[1]}).")
    return z, y.astype(np.int64)


def nll(logit_list: Any, labels: Any, temperature: float) -> float:
    """Mean negative log-likelihood of ``labels`` under softmax(z / T)."""
    temperature = _check_temperature(temperature)
    z, y = _check_samples(logit_list, labels)
    return float(-np.mean(_log_likelihoods(z, y, temperature)))


class SearchConfig(object):
    """Temperature search over log T: a coarse log-grid scan seeds a bounded
    Brent refinement between the neighbours of the best grid point."""

    def __init__(
        self,
        t_min: float = 0.05,
        t_max: float = 20.0,
        grid_points: int = 40,
        tolerance: float = 1e-4,
    ) -> None:
        if not 0 < t_min < t_max or not math.isfinite(t_max):
            raise ProgrammingError(f"Invalid temperature bounds [{t_min}, {t_max}].")
        if grid_points < 3:
            raise ProgrammingError("The coarse grid needs at least 3 points.")
        if tolerance <= 0:
            raise ProgrammingError("Tolerance must be positive.")
        self.t_min = t_min
        self.t_max = t_max
        self.grid_points = grid_points
        self.tolerance = tolerance


class CalibrationResult(object):
    def __init__(
        self,
        temperature: float,
        nll_before: float,
        nll_after: float,
        clamped: bool,
        num_samples: int,
    ) -> None:
        self._temperature = temperature
        self._nll_before = nll_before
        self._nll_after = nll_after
        self._clamped = clamped
        self._num_samples = num_samples

    @property
    def temperature(self) -> float:
        return self._temperature

    @property
    def nll_before(self) -> float:
        return self._nll_before

    @property
    def nll_after(self) -> float:
        return self._nll_after

    @property
    def clamped(self) -> bool:
        return self._clamped

    @property
    def num_samples(self) -> int:
        return self._num_samples

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self._temperature,
            "nll_before": self._nll_before,
            "nll_after": self._nll_after,
            "clamped": self._clamped,
            "n": self._num_samples,
        }

    @classmethod
    def from_dict(cls, obj: Any) -> "CalibrationResult":
        keys = {"t", "nll_before", "nll_after", "clamped", "n"}
        if not isinstance(obj, dict) or set(obj) != keys:
            raise DataError(f"Malformed calibration result: {obj!r}.")
        try:
            temperature = float(obj["t"])
            result = cls(
                temperature=_check_temperature(temperature),
                nll_before=float(obj["nll_before"]),
                nll_after=float(obj["nll_after"]),
                clamped=bool(obj["clamped"]),
                num_samples=int(obj["n"]),
            )
        except (TypeError, ValueError, ProgrammingError) as e:
            raise DataError(f"Malformed calibration result: {obj!r}.") from e
        return result

    def __repr__(self) -> str:
        return (
            f"CalibrationResult(t={self._temperature:.6g}, "
            f"nll_before={self._nll_before:.6g}, nll_after={self._nll_after:.6g}, "
            f"clamped={self._clamped}, n={self._num_samples})"
        )


def fit_temperature(
    validation_logits_at_exit: Any,
    labels: Any,
    search: Optional[SearchConfig] = None,
) -> CalibrationResult:
    search = search if search else SearchConfig()
    z, y = _check_samples(validation_logits_at_exit, labels)
    if len(y) < 2:
        raise ProgrammingError(
            "Temperature fitting needs at least 2 validation samples."
        )
    if len(np.unique(y)) < 2:
        _logger.warning(
            "Validation labels contain a single class; the fit is degenerate."
        )

    def objective(log_t: float) -> float:
        return float(-np.mean(_log_likelihoods(z, y, math.exp(log_t))))

    lower, upper = math.log(search.t_min), math.log(search.t_max)
    grid = np.linspace(lower, upper, search.grid_points)
    values = [objective(u) for u in grid]
    best = int(np.argmin(values))
    bracket = (grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)])
    refined = minimize_scalar(
        objective, bounds=bracket, method="bounded", options={"xatol": search.tolerance}
    )
    _logger.debug(
        "Grid optimum T=%.6g, refined T=%.6g (%d evaluations).",
        math.exp(grid[best]),
        math.exp(refined.x),
        refined.nfev,
    )

    nll_before = objective(0.0)
    # Ties keep the earlier candidate; T = 1 only competes inside the window.
    candidates = [
        (float(refined.fun), float(refined.x)),
        (values[best], float(grid[best])),
    ]
    if search.t_min <= 1.0 <= search.t_max:
        candidates.append((nll_before, 0.0))
    _, log_t = min(candidates, key=lambda c: c[0])

    # An optimum within tolerance of a bound is snapped onto it.
    if log_t - lower <= search.tolerance:
        temperature = search.t_min
    elif upper - log_t <= search.tolerance:
        temperature = search.t_max
    else:
        temperature = math.exp(log_t)
    clamped = temperature in (search.t_min, search.t_max)
    nll_after = objective(math.log(temperature))
    if clamped:
        _logger.warning("Temperature clamped at the search bound %g.", temperature)
    _logger.info(
        "Fitted T=%.6g: NLL %.6g -> %.6g (n=%d).",
        temperature,
        nll_before,
        nll_after,
        len(y),
    )
    return CalibrationResult(
        temperature=temperature,
        nll_before=nll_before,
        nll_after=nll_after,
        clamped=clamped,
        num_samples=len(y),
    )


def fit_exit_temperatures(
    dataset: TraceDataset,
    search: Optional[SearchConfig] = None,
    sample_masks: Optional[Sequence[np.ndarray]] = None,
) -> List[CalibrationResult]:
    """Fit one temperature per exit, each independently on the samples selected
    by its mask (all samples when no masks are given)."""
    if sample_masks is not None and len(sample_masks) != dataset.num_exits:
        raise ProgrammingError("Expected one sample mask per exit.")
    results = []
    for exit_index in range(1, dataset.num_exits + 1):
        logits = dataset.logits_at_exit(exit_index)
        labels = dataset.labels
        if sample_masks is not None:
            mask = np.asarray(sample_masks[exit_index - 1], dtype=bool)
            logits, labels = logits[mask], labels[mask]
        _logger.debug("Calibrating exit %d on %d samples.", exit_index, len(labels))
        results.append(fit_temperature(logits, labels, search))
    return results


class ReliabilityBin(object):
    def __init__(self, mean_confidence: float, accuracy: float, count: int) -> None:
        self._mean_confidence = mean_confidence
        self._accuracy = accuracy
        self._count = count

    @property
    def mean_confidence(self) -> float:
        return self._mean_confidence

    @property
    def accuracy(self) -> float:
        return self._accuracy

    @property
    def count(self) -> int:
        return self._count

    def __iter__(self):
        return iter((self._mean_confidence, self._accuracy, self._count))

    def __repr__(self) -> str:
        return (
            f"ReliabilityBin({self._mean_confidence}, {self._accuracy}, {self._count})"
        )


class ReliabilityCurve(object):
    def __init__(self, bins: Sequence[ReliabilityBin]) -> None:
        self._bins = list(bins)

    @property
    def bins(self) -> List[ReliabilityBin]:
        return self._bins

    @property
    def num_samples(self) -> int:
        return sum(b.count for b in self._bins)

    @property
    def max_deviation(self) -> float:
        """Largest per-bin gap between mean confidence and accuracy."""
        return max(abs(b.mean_confidence - b.accuracy) for b in self._bins)


def reliability_curve(
    confidences: Any, correct_flags: Any, num_bins: int = 10
) -> ReliabilityCurve:
    conf = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct_flags, dtype=bool)
    if conf.ndim != 1 or conf.size == 0:
        raise ProgrammingError("Reliability curve needs at least one confidence.")
    if correct.shape != conf.shape:
        raise ProgrammingError("Confidences and correctness flags differ in length.")
    if num_bins < 1:
        raise ProgrammingError(f"Number of bins must be at least 1, got {num_bins}.")
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise ProgrammingError("Confidences must lie in [0, 1].")

    index = np.minimum((conf * num_bins).astype(np.int64), num_bins - 1)
    counts = np.bincount(index, minlength=num_bins)
    conf_sums = np.bincount(index, weights=conf, minlength=num_bins)
    correct_sums = np.bincount(
        index, weights=correct.astype(np.float64), minlength=num_bins
    )
    return ReliabilityCurve(
        [
            ReliabilityBin(
                mean_confidence=float(conf_sums[i] / counts[i]),
                accuracy=float(correct_sums[i] / counts[i]),
                count=int(counts[i]),
            )
            for i in range(num_bins)
            if counts[i] > 0
        ]
    )
