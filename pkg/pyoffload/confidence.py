# -*- coding: utf-8 -*-
import logging
import math
from abc import ABCMeta, abstractmethod
from typing import Any, Dict, Optional, Tuple, Type, Union

import numpy as np
from scipy.special import entr

from pyoffload.error import ProgrammingError

_logger = logging.getLogger(__name__)  # type: ignore


class ConfidenceRule(object, metaclass=ABCMeta):
    """Maps probability vectors to (predicted class, confidence in [0, 1]).

    Higher is more confident for every rule. A rule may carry its own
    ``threshold``; otherwise the policy's target confidence applies."""

    name: str = ""

    def __init__(self, threshold: Optional[float] = None) -> None:
        if threshold is not None and not 0.0 <= threshold <= 1.0:
            raise ProgrammingError(
                f"Rule threshold must be in [0, 1], got {threshold}."
            )
        self._threshold = threshold

    @property
    def threshold(self) -> Optional[float]:
        return self._threshold

    def effective_threshold(self, p_tar: float) -> float:
        return self._threshold if self._threshold is not None else p_tar

    @staticmethod
    def predict(probs: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the lowest class index.
        return np.argmax(probs, axis=-1)

    @abstractmethod
    def score(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError  # pragma: no cover

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfidenceRule):
            return NotImplemented
        return type(self) is type(other) and self._threshold == other._threshold

    def __repr__(self) -> str:
        return f"{type(self).__name__}(threshold={self._threshold})"


class MaxProbabilityRule(ConfidenceRule):

    name: str = "max-probability"

    def score(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.predict(probs), np.max(probs, axis=-1)


class EntropyRule(ConfidenceRule):
    """Confidence 1 - H(p) / ln K, so a uniform vector scores 0."""

    name: str = "entropy"

    def score(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        entropy = np.sum(entr(probs), axis=-1)
        confidence = 1.0 - entropy / math.log(probs.shape[-1])
        return self.predict(probs), np.clip(confidence, 0.0, 1.0)


_DEFAULT_RULES: Dict[str, Type[ConfidenceRule]] = {
    MaxProbabilityRule.name: MaxProbabilityRule,
    EntropyRule.name: EntropyRule,
}


def get_rule(
    rule: Union[str, ConfidenceRule], threshold: Optional[float] = None
) -> ConfidenceRule:
    if isinstance(rule, ConfidenceRule):
        return rule
    rule_class = _DEFAULT_RULES.get(rule, None)
    if not rule_class:
        raise ProgrammingError(
            f"Unknown confidence rule `{rule}`; "
            f"expected one of {sorted(_DEFAULT_RULES)}."
        )
    return rule_class(threshold)


def confidence_of(
    probs: Any, rule: Union[str, ConfidenceRule] = MaxProbabilityRule.name
) -> Tuple[int, float]:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ProgrammingError("Expected a single probability vector.")
    if np.any(p < 0.0) or np.any(p > 1.0) or abs(float(np.sum(p)) - 1.0) > 1e-9:
        raise ProgrammingError("Not a probability vector.")
    predicted, confidence = get_rule(rule).score(p)
    return int(predicted), float(confidence)
