# -*- coding: utf-8 -*-
import logging
import math
from concurrent.futures.thread import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pyoffload import DEFAULT_BATCH_SIZE
from pyoffload.cascade import ExitDecision, ExitPolicy, ExitScores
from pyoffload.error import ProgrammingError
from pyoffload.latency import AGGREGATIONS, LatencyProfile, batch_time
from pyoffload.model import TraceDataset
from pyoffload.util import get_chunks

_logger = logging.getLogger(__name__)  # type: ignore

ACCURACY_SCOPES: Tuple[str, ...] = ("total", "device")


class DeadlineSpec(object):
    def __init__(self, t_tar: float) -> None:
        if isinstance(t_tar, bool) or not isinstance(t_tar, (int, float)):
            raise ProgrammingError(f"Deadline must be a number, got {t_tar!r}.")
        if math.isnan(t_tar) or t_tar <= 0:
            raise ProgrammingError(f"Deadline must be positive, got {t_tar}.")
        self._t_tar = float(t_tar)

    @property
    def t_tar(self) -> float:
        return self._t_tar

    def __repr__(self) -> str:
        return f"DeadlineSpec(t_tar={self._t_tar})"


class BatchReport(object):
    """One batch of a report. ``outage`` is None for a batch without on-device
    samples; ``batch_time_s`` and ``missed`` are None without a latency profile
    or a deadline."""

    def __init__(
        self,
        batch_index: int,
        size: int,
        device_count: int,
        device_accuracy: Optional[float],
        batch_accuracy: float,
        batch_time_s: Optional[float],
        outage: Optional[bool],
        missed: Optional[bool],
    ) -> None:
        self.batch_index = batch_index
        self.size = size
        self.device_count = device_count
        self.device_accuracy = device_accuracy
        self.batch_accuracy = batch_accuracy
        self.batch_time_s = batch_time_s
        self.outage = outage
        self.missed = missed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "batch_index": self.batch_index,
            "size": self.size,
            "device_count": self.device_count,
            "device_accuracy": self.device_accuracy,
            "batch_accuracy": self.batch_accuracy,
            "batch_time_s": self.batch_time_s,
            "outage": self.outage,
            "missed": self.missed,
        }

    def __repr__(self) -> str:
        return f"BatchReport({self.to_dict()})"


class ExperimentReport(object):
    def __init__(
        self,
        p_tar: float,
        t_tar: Optional[float],
        calibrated: bool,
        temperatures: Sequence[float],
        device_classification_probability: float,
        offloading_probability: float,
        device_accuracy: Optional[float],
        cloud_accuracy: Optional[float],
        total_accuracy: float,
        device_mean_confidence: Optional[float],
        outage_probability: Optional[float],
        outage_batches_counted: int,
        missed_deadline_probability: Optional[float],
        per_batch: Sequence[BatchReport],
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        self._p_tar = p_tar
        self._t_tar = t_tar
        self._calibrated = calibrated
        self._temperatures = tuple(temperatures)
        self._device_classification_probability = device_classification_probability
        self._offloading_probability = offloading_probability
        self._device_accuracy = device_accuracy
        self._cloud_accuracy = cloud_accuracy
        self._total_accuracy = total_accuracy
        self._device_mean_confidence = device_mean_confidence
        self._outage_probability = outage_probability
        self._outage_batches_counted = outage_batches_counted
        self._missed_deadline_probability = missed_deadline_probability
        self._per_batch = list(per_batch)
        self._metadata = dict(metadata) if metadata else {}

    @property
    def p_tar(self) -> float:
        return self._p_tar

    @property
    def t_tar(self) -> Optional[float]:
        return self._t_tar

    @property
    def calibrated(self) -> bool:
        return self._calibrated

    @property
    def temperatures(self) -> Tuple[float, ...]:
        return self._temperatures

    @property
    def device_classification_probability(self) -> float:
        return self._device_classification_probability

    @property
    def offloading_probability(self) -> float:
        return self._offloading_probability

    @property
    def device_accuracy(self) -> Optional[float]:
        return self._device_accuracy

    @property
    def cloud_accuracy(self) -> Optional[float]:
        return self._cloud_accuracy

    @property
    def total_accuracy(self) -> float:
        return self._total_accuracy

    @property
    def device_mean_confidence(self) -> Optional[float]:
        return self._device_mean_confidence

    @property
    def outage_probability(self) -> Optional[float]:
        return self._outage_probability

    @property
    def outage_batches_counted(self) -> int:
        return self._outage_batches_counted

    @property
    def missed_deadline_probability(self) -> Optional[float]:
        return self._missed_deadline_probability

    @property
    def per_batch(self) -> List[BatchReport]:
        return self._per_batch

    @property
    def metadata(self) -> Dict[str, Any]:
        return self._metadata

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_tar": self._p_tar,
            "t_tar": self._t_tar,
            "calibrated": self._calibrated,
            "temperatures": list(self._temperatures),
            "device_prob": self._device_classification_probability,
            "offload_prob": self._offloading_probability,
            "device_acc": self._device_accuracy,
            "cloud_acc": self._cloud_accuracy,
            "total_acc": self._total_accuracy,
            "device_mean_conf": self._device_mean_confidence,
            "outage_prob": self._outage_probability,
            "outage_batches": self._outage_batches_counted,
            "missed_prob": self._missed_deadline_probability,
            "per_batch": [b.to_dict() for b in self._per_batch],
            "metadata": dict(self._metadata),
        }

    def __repr__(self) -> str:
        return (
            f"ExperimentReport(p_tar={self._p_tar}, t_tar={self._t_tar}, "
            f"calibrated={self._calibrated}, "
            f"device_prob={self._device_classification_probability:.4f}, "
            f"total_acc={self._total_accuracy:.4f}, outage={self._outage_probability})"
        )


def _check_non_empty(decisions: Sequence[ExitDecision]) -> None:
    if not decisions:
        raise ProgrammingError("No decisions to evaluate.")


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def device_classification_probability(decisions: Sequence[ExitDecision]) -> float:
    _check_non_empty(decisions)
    return sum(1 for d in decisions if d.on_device) / len(decisions)


def offloading_probability(decisions: Sequence[ExitDecision]) -> float:
    _check_non_empty(decisions)
    return sum(1 for d in decisions if not d.on_device) / len(decisions)


def device_accuracy(decisions: Sequence[ExitDecision]) -> Optional[float]:
    on_device = [d for d in decisions if d.on_device]
    return _ratio(sum(1 for d in on_device if d.correct), len(on_device))


def cloud_accuracy(decisions: Sequence[ExitDecision]) -> Optional[float]:
    offloaded = [d for d in decisions if not d.on_device]
    return _ratio(sum(1 for d in offloaded if d.correct), len(offloaded))


def total_accuracy(decisions: Sequence[ExitDecision]) -> float:
    _check_non_empty(decisions)
    return sum(1 for d in decisions if d.correct) / len(decisions)


def device_mean_confidence(decisions: Sequence[ExitDecision]) -> Optional[float]:
    confidences = [d.confidence for d in decisions if d.on_device]
    return math.fsum(confidences) / len(confidences) if confidences else None


def _check_batching(batch_size: int, p_tar: float) -> None:
    if batch_size < 1:
        raise ProgrammingError(f"Batch size must be at least 1, got {batch_size}.")
    if not 0.0 <= p_tar <= 1.0:
        raise ProgrammingError(f"Target confidence must be in [0, 1], got {p_tar}.")


def _batches(
    decisions: Sequence[ExitDecision], batch_size: int, drop_partial_batch: bool
) -> List[Sequence[ExitDecision]]:
    batches = list(get_chunks(decisions, batch_size))
    if drop_partial_batch and batches and len(batches[-1]) < batch_size:
        batches.pop()
    return batches


class _BatchStats(object):
    def __init__(
        self,
        index: int,
        batch: Sequence[ExitDecision],
        profile: Optional[LatencyProfile],
        aggregation: str,
    ) -> None:
        self.index = index
        self.size = len(batch)
        self.device_count = sum(1 for d in batch if d.on_device)
        self.device_correct = sum(1 for d in batch if d.on_device and d.correct)
        self.correct = sum(1 for d in batch if d.correct)
        self.time_s = batch_time(batch, profile, aggregation) if profile else None

    def report(
        self, p_tar: float, deadline: Optional[DeadlineSpec], accuracy_scope: str
    ) -> BatchReport:
        device_acc = _ratio(self.device_correct, self.device_count)
        batch_acc = self.correct / self.size
        outage = None if device_acc is None else device_acc < p_tar
        missed = None
        if deadline is not None and self.time_s is not None:
            accuracy = batch_acc if accuracy_scope == "total" else device_acc
            # A batch without on-device samples has no device accuracy to miss.
            accuracy_missed = accuracy is not None and accuracy < p_tar
            missed = self.time_s > deadline.t_tar or accuracy_missed
        return BatchReport(
            batch_index=self.index,
            size=self.size,
            device_count=self.device_count,
            device_accuracy=device_acc,
            batch_accuracy=batch_acc,
            batch_time_s=self.time_s,
            outage=outage,
            missed=missed,
        )


def _batch_stats(
    decisions: Sequence[ExitDecision],
    batch_size: int,
    drop_partial_batch: bool,
    profile: Optional[LatencyProfile] = None,
    aggregation: str = "mean",
) -> List[_BatchStats]:
    if aggregation not in AGGREGATIONS:
        raise ProgrammingError(
            f"Unknown aggregation `{aggregation}`; "
            f"expected one of {list(AGGREGATIONS)}."
        )
    return [
        _BatchStats(i, batch, profile, aggregation)
        for i, batch in enumerate(_batches(decisions, batch_size, drop_partial_batch))
    ]


def _outage(batches: Sequence[BatchReport]) -> Tuple[Optional[float], int]:
    counted = [b for b in batches if b.outage is not None]
    return _ratio(sum(1 for b in counted if b.outage), len(counted)), len(counted)


def _missed(batches: Sequence[BatchReport]) -> Optional[float]:
    return _ratio(sum(1 for b in batches if b.missed), len(batches))


def outage_probability(
    decisions: Sequence[ExitDecision],
    p_tar: float,
    batch_size: int = DEFAULT_BATCH_SIZE,
    drop_partial_batch: bool = False,
) -> Tuple[Optional[float], int]:
    """Fraction of batches whose on-device accuracy falls below ``p_tar``.

    Batches without on-device samples are left out of the denominator; the
    number of counted batches is returned alongside."""
    _check_batching(batch_size, p_tar)
    stats = _batch_stats(decisions, batch_size, drop_partial_batch)
    return _outage([s.report(p_tar, None, "total") for s in stats])


def missed_deadline_probability(
    decisions: Sequence[ExitDecision],
    profile: LatencyProfile,
    p_tar: float,
    deadline: DeadlineSpec,
    batch_size: int = DEFAULT_BATCH_SIZE,
    aggregation: str = "mean",
    drop_partial_batch: bool = False,
    accuracy_scope: str = "total",
) -> float:
    """Fraction of all batches that run past ``deadline`` or whose accuracy
    (total by default, on-device with ``accuracy_scope="device"``) falls
    below ``p_tar``."""
    _check_non_empty(decisions)
    _check_batching(batch_size, p_tar)
    if accuracy_scope not in ACCURACY_SCOPES:
        raise ProgrammingError(
            f"Unknown accuracy scope `{accuracy_scope}`; "
            f"expected one of {list(ACCURACY_SCOPES)}."
        )
    stats = _batch_stats(
        decisions, batch_size, drop_partial_batch, profile, aggregation
    )
    if not stats:
        raise ProgrammingError(
            f"No complete batch of {batch_size} among {len(decisions)} decisions."
        )
    missed = _missed([s.report(p_tar, deadline, accuracy_scope) for s in stats])
    return float(missed)  # type: ignore


def _report(
    decisions: Sequence[ExitDecision],
    policy: ExitPolicy,
    stats: Sequence[_BatchStats],
    deadline: Optional[DeadlineSpec],
    accuracy_scope: str,
    calibrated: bool,
    metadata: Dict[str, Any],
) -> ExperimentReport:
    per_batch = [s.report(policy.p_tar, deadline, accuracy_scope) for s in stats]
    outage, counted = _outage(per_batch)
    missed = None
    if deadline is not None and per_batch and per_batch[0].missed is not None:
        missed = _missed(per_batch)
    return ExperimentReport(
        p_tar=policy.p_tar,
        t_tar=deadline.t_tar if deadline else None,
        calibrated=calibrated,
        temperatures=policy.temperatures,
        device_classification_probability=device_classification_probability(decisions),
        offloading_probability=offloading_probability(decisions),
        device_accuracy=device_accuracy(decisions),
        cloud_accuracy=cloud_accuracy(decisions),
        total_accuracy=total_accuracy(decisions),
        device_mean_confidence=device_mean_confidence(decisions),
        outage_probability=outage,
        outage_batches_counted=counted,
        missed_deadline_probability=missed,
        per_batch=per_batch,
        metadata=metadata,
    )


def _evaluate_deadlines(
    decisions: Sequence[ExitDecision],
    policy: ExitPolicy,
    deadlines: Sequence[Optional[DeadlineSpec]],
    batch_size: int,
    profile: Optional[LatencyProfile],
    drop_partial_batch: bool,
    aggregation: str,
    accuracy_scope: str,
    calibrated: Optional[bool],
    metadata: Optional[Dict[str, Any]],
) -> List[ExperimentReport]:
    _check_non_empty(decisions)
    _check_batching(batch_size, policy.p_tar)
    if accuracy_scope not in ACCURACY_SCOPES:
        raise ProgrammingError(
            f"Unknown accuracy scope `{accuracy_scope}`; "
            f"expected one of {list(ACCURACY_SCOPES)}."
        )
    if profile is not None and profile.device_exit_count != policy.device_exit_count:
        raise ProgrammingError(
            f"Profile has {profile.device_exit_count} device segments but the policy "
            f"runs {policy.device_exit_count} exits on the device."
        )
    stats = _batch_stats(
        decisions, batch_size, drop_partial_batch, profile, aggregation
    )
    report_metadata = {
        "batch_size": batch_size,
        "drop_partial_batch": drop_partial_batch,
        "aggregation": aggregation,
        "accuracy_scope": accuracy_scope,
        "confidence_rule": policy.confidence_rule.name,
        "device_exit_count": policy.device_exit_count,
        "num_samples": len(decisions),
    }
    report_metadata.update(metadata or {})
    calibrated = policy.calibrated if calibrated is None else calibrated
    return [
        _report(
            decisions, policy, stats, d, accuracy_scope, calibrated, report_metadata
        )
        for d in deadlines
    ]


def evaluate(
    decisions: Sequence[ExitDecision],
    policy: ExitPolicy,
    batch_size: int = DEFAULT_BATCH_SIZE,
    profile: Optional[LatencyProfile] = None,
    deadline: Optional[DeadlineSpec] = None,
    drop_partial_batch: bool = False,
    aggregation: str = "mean",
    accuracy_scope: str = "total",
    calibrated: Optional[bool] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """All metrics of one cascade run under ``policy``.

    The aggregate probabilities and accuracies use every decision; outage and
    missed deadline use the batches (the trailing partial batch is dropped
    only with ``drop_partial_batch``). The missed deadline probability needs
    both a profile and a deadline."""
    return _evaluate_deadlines(
        decisions,
        policy,
        [deadline],
        batch_size,
        profile,
        drop_partial_batch,
        aggregation,
        accuracy_scope,
        calibrated,
        metadata,
    )[0]


def sweep(
    dataset: TraceDataset,
    policy_template: ExitPolicy,
    p_tar_grid: Sequence[float],
    t_tar_grid: Sequence[float],
    profile: LatencyProfile,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_workers: int = 1,
    drop_partial_batch: bool = False,
    aggregation: str = "mean",
    accuracy_scope: str = "total",
    calibrated: Optional[bool] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> List[ExperimentReport]:
    """One report per (p_tar, t_tar) grid point, p_tar outer and t_tar inner.

    The temperatures and confidence rule come from ``policy_template``."""
    if not p_tar_grid or not t_tar_grid:
        raise ProgrammingError("Sweep grids must not be empty.")
    if max_workers < 1:
        raise ProgrammingError(f"Worker count must be at least 1, got {max_workers}.")
    policies = [policy_template.with_p_tar(p) for p in p_tar_grid]
    deadlines: List[Optional[DeadlineSpec]] = [DeadlineSpec(t) for t in t_tar_grid]
    scores = ExitScores(dataset, policy_template)

    def run(policy: ExitPolicy) -> List[ExperimentReport]:
        _logger.debug(
            "Sweeping p_tar=%g over %d deadlines.", policy.p_tar, len(deadlines)
        )
        return _evaluate_deadlines(
            scores.decide(policy.p_tar),
            policy,
            deadlines,
            batch_size,
            profile,
            drop_partial_batch,
            aggregation,
            accuracy_scope,
            calibrated,
            metadata,
        )

    if max_workers == 1:
        rows = [run(p) for p in policies]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            rows = list(executor.map(run, policies))
    reports = [r for row in rows for r in row]
    _logger.info(
        "Swept %d x %d grid points (calibrated=%s).",
        len(policies),
        len(deadlines),
        reports[0].calibrated,
    )
    return reports
