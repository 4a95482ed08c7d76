# -*- coding: utf-8 -*-
import logging
import math
from concurrent.futures.thread import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pyoffload.calibration import scaled_softmax
from pyoffload.confidence import ConfidenceRule, MaxProbabilityRule, get_rule
from pyoffload.error import ProgrammingError
from pyoffload.model import LogitRecord, TraceDataset
from pyoffload.util import get_chunks

_logger = logging.getLogger(__name__)  # type: ignore


class ExitPolicy(object):
    """Target confidence, per-exit temperatures and the device/cloud partition.

    Exits 1..D run on the device, exits D+1..B on the cloud. A temperature of
    1.0 leaves an exit uncalibrated."""

    def __init__(
        self,
        p_tar: float,
        temperatures: Sequence[float],
        confidence_rule: Union[str, ConfidenceRule] = MaxProbabilityRule.name,
        device_exit_count: Optional[int] = None,
    ) -> None:
        if not 0.0 < p_tar < 1.0:
            raise ProgrammingError(f"Target confidence must be in (0, 1), got {p_tar}.")
        temperatures = tuple(float(t) for t in temperatures)
        if not temperatures:
            raise ProgrammingError("A policy needs at least one exit temperature.")
        for t in temperatures:
            if not math.isfinite(t) or t <= 0:
                raise ProgrammingError(f"Temperatures must be positive, got {t}.")
        if device_exit_count is None:
            device_exit_count = max(len(temperatures) - 1, 1)
        if not 1 <= device_exit_count <= len(temperatures):
            raise ProgrammingError(
                f"Device exit count must be in [1, {len(temperatures)}], "
                f"got {device_exit_count}."
            )
        self._p_tar = float(p_tar)
        self._temperatures = temperatures
        self._confidence_rule = get_rule(confidence_rule)
        self._device_exit_count = device_exit_count

    @classmethod
    def conventional(
        cls,
        num_exits: int,
        p_tar: float,
        confidence_rule: Union[str, ConfidenceRule] = MaxProbabilityRule.name,
        device_exit_count: Optional[int] = None,
    ) -> "ExitPolicy":
        return cls(p_tar, [1.0] * num_exits, confidence_rule, device_exit_count)

    @property
    def p_tar(self) -> float:
        return self._p_tar

    @property
    def temperatures(self) -> Tuple[float, ...]:
        return self._temperatures

    @property
    def confidence_rule(self) -> ConfidenceRule:
        return self._confidence_rule

    @property
    def device_exit_count(self) -> int:
        return self._device_exit_count

    @property
    def num_exits(self) -> int:
        return len(self._temperatures)

    @property
    def threshold(self) -> float:
        return self._confidence_rule.effective_threshold(self._p_tar)

    @property
    def calibrated(self) -> bool:
        return any(t != 1.0 for t in self._temperatures)

    def with_p_tar(self, p_tar: float) -> "ExitPolicy":
        return ExitPolicy(
            p_tar, self._temperatures, self._confidence_rule, self._device_exit_count
        )

    def with_temperatures(self, temperatures: Sequence[float]) -> "ExitPolicy":
        return ExitPolicy(
            self._p_tar, temperatures, self._confidence_rule, self._device_exit_count
        )

    def __repr__(self) -> str:
        return (
            f"ExitPolicy(p_tar={self._p_tar}, temperatures={list(self._temperatures)}, "
            f"confidence_rule={self._confidence_rule!r}, "
            f"device_exit_count={self._device_exit_count})"
        )


class ExitDecision(object):
    def __init__(
        self,
        sample_id: int,
        exit_index: int,
        predicted_class: int,
        confidence: float,
        on_device: bool,
        label: int,
    ) -> None:
        self._sample_id = sample_id
        self._exit_index = exit_index
        self._predicted_class = predicted_class
        self._confidence = confidence
        self._on_device = on_device
        self._label = label

    @property
    def sample_id(self) -> int:
        return self._sample_id

    @property
    def exit_index(self) -> int:
        return self._exit_index

    @property
    def predicted_class(self) -> int:
        return self._predicted_class

    @property
    def confidence(self) -> float:
        return self._confidence

    @property
    def on_device(self) -> bool:
        return self._on_device

    @property
    def label(self) -> int:
        return self._label

    @property
    def correct(self) -> bool:
        return self._predicted_class == self._label

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExitDecision):
            return NotImplemented
        return (
            self._sample_id == other._sample_id
            and self._exit_index == other._exit_index
            and self._predicted_class == other._predicted_class
            and self._confidence == other._confidence
            and self._on_device == other._on_device
            and self._label == other._label
        )

    def __repr__(self) -> str:
        return (
            f"ExitDecision(sample_id={self._sample_id}, exit_index={self._exit_index}, "
            f"predicted_class={self._predicted_class}, "
            f"confidence={self._confidence:.6g}, on_device={self._on_device}, "
            f"correct={self.correct})"
        )


def _check_dimensions(num_exits: int, policy: ExitPolicy) -> None:
    if num_exits != policy.num_exits:
        raise ProgrammingError(
            f"Trace has {num_exits} exits but the policy has "
            f"{policy.num_exits} temperatures."
        )


def _score_exits(
    logits: np.ndarray, policy: ExitPolicy
) -> Tuple[np.ndarray, np.ndarray]:
    """Predictions and confidences of every exit for an (N, B, K) logit block."""
    n, b = logits.shape[0], logits.shape[1]
    predictions = np.empty((n, b), dtype=np.int64)
    confidences = np.empty((n, b), dtype=np.float64)
    for i, temperature in enumerate(policy.temperatures):
        probs = scaled_softmax(logits[:, i, :], temperature)
        predictions[:, i], confidences[:, i] = policy.confidence_rule.score(probs)
    return predictions, confidences


def _first_firing_exits(confidences: np.ndarray, threshold: float) -> np.ndarray:
    """0-based index of the first exit whose confidence meets the threshold;
    the final exit always fires."""
    fires = confidences >= threshold
    fires[:, -1] = True
    return np.argmax(fires, axis=1)


class ExitScores(object):
    """Per-exit predictions and confidences of a dataset under a policy's
    temperatures, reusable across target confidences."""

    def __init__(
        self, dataset: TraceDataset, policy: ExitPolicy, max_workers: int = 1
    ) -> None:
        _check_dimensions(dataset.num_exits, policy)
        if max_workers < 1:
            raise ProgrammingError(
                f"Worker count must be at least 1, got {max_workers}."
            )
        self._policy = policy
        self._sample_ids = dataset.sample_ids
        self._labels = dataset.labels
        logits = dataset.logits
        if max_workers == 1 or len(dataset) < 2:
            self._predictions, self._confidences = _score_exits(logits, policy)
        else:
            chunksize = -(-len(dataset) // max_workers)
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                parts = list(
                    executor.map(
                        lambda chunk: _score_exits(chunk, policy),
                        get_chunks(logits, chunksize),
                    )
                )
            self._predictions = np.concatenate([p for p, _ in parts])
            self._confidences = np.concatenate([c for _, c in parts])

    @property
    def policy(self) -> ExitPolicy:
        return self._policy

    @property
    def predictions(self) -> np.ndarray:
        return self._predictions

    @property
    def confidences(self) -> np.ndarray:
        return self._confidences

    def decide(self, p_tar: Optional[float] = None) -> List[ExitDecision]:
        policy = self._policy if p_tar is None else self._policy.with_p_tar(p_tar)
        exits = _first_firing_exits(self._confidences, policy.threshold)
        rows = np.arange(len(exits))
        predicted = self._predictions[rows, exits]
        confidence = self._confidences[rows, exits]
        device_exit_count = policy.device_exit_count
        return [
            ExitDecision(
                sample_id=sample_id,
                exit_index=int(e) + 1,
                predicted_class=int(p),
                confidence=float(c),
                on_device=int(e) < device_exit_count,
                label=int(y),
            )
            for sample_id, e, p, c, y in zip(
                self._sample_ids, exits, predicted, confidence, self._labels
            )
        ]


def decide_exit(record: LogitRecord, policy: ExitPolicy) -> ExitDecision:
    _check_dimensions(record.num_exits, policy)
    predictions, confidences = _score_exits(record.logits[np.newaxis], policy)
    e = int(_first_firing_exits(confidences, policy.threshold)[0])
    return ExitDecision(
        sample_id=record.sample_id,
        exit_index=e + 1,
        predicted_class=int(predictions[0, e]),
        confidence=float(confidences[0, e]),
        on_device=e < policy.device_exit_count,
        label=record.label,
    )


def run_cascade(
    dataset: TraceDataset, policy: ExitPolicy, max_workers: int = 1
) -> List[ExitDecision]:
    decisions = ExitScores(dataset, policy, max_workers).decide()
    _logger.debug(
        "Cascade at p_tar=%g: %d of %d samples exit on device.",
        policy.p_tar,
        sum(d.on_device for d in decisions),
        len(decisions),
    )
    return decisions
