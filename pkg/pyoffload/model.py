# -*- coding: utf-8 -*-
import logging
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from pyoffload.error import DataError, ProgrammingError

_logger = logging.getLogger(__name__)  # type: ignore


def _is_index(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(
        value, (bool, np.bool_)
    )


class LogitRecord(object):
    """One sample: its ground-truth label and one logit vector per exit.

    Exit 1 is the shallowest device branch, exit B the final cloud exit."""

    def __init__(self, sample_id: int, label: int, logits_per_exit: Any) -> None:
        if not _is_index(sample_id) or sample_id < 0:
            raise DataError(
                f"Sample id must be a non-negative integer, got {sample_id!r}."
            )
        if not _is_index(label):
            raise DataError(f"Label must be an integer, got {label!r}.")
        try:
            logits = np.array(logits_per_exit, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise DataError(
                f"Logits of sample {sample_id} are not a B x K matrix."
            ) from e
        if logits.ndim != 2 or logits.shape[0] < 1:
            raise DataError(f"Logits of sample {sample_id} are not a B x K matrix.")
        if logits.shape[1] < 2:
            raise DataError(f"Sample {sample_id} has fewer than 2 classes.")
        if not np.all(np.isfinite(logits)):
            raise DataError(f"Sample {sample_id} has a non-finite logit.")
        if not 0 <= label < logits.shape[1]:
            raise DataError(
                f"Label {label} of sample {sample_id} is out of range "
                f"[0, {logits.shape[1]})."
            )
        logits.flags.writeable = False
        self._sample_id = int(sample_id)
        self._label = int(label)
        self._logits = logits

    @property
    def sample_id(self) -> int:
        return self._sample_id

    @property
    def label(self) -> int:
        return self._label

    @property
    def logits(self) -> np.ndarray:
        return self._logits

    @property
    def num_exits(self) -> int:
        return int(self._logits.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self._logits.shape[1])

    def logits_at(self, exit_index: int) -> np.ndarray:
        if not 1 <= exit_index <= self.num_exits:
            raise ProgrammingError(
                f"Exit {exit_index} is out of range [1, {self.num_exits}]."
            )
        return self._logits[exit_index - 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LogitRecord):
            return NotImplemented
        return (
            self._sample_id == other._sample_id
            and self._label == other._label
            and self._logits.shape == other._logits.shape
            and bool(np.array_equal(self._logits, other._logits))
        )

    def __repr__(self) -> str:
        return (
            f"LogitRecord(sample_id={self._sample_id}, label={self._label}, "
            f"exits={self.num_exits}, classes={self.num_classes})"
        )


class TraceDataset(object):
    """An ordered, immutable collection of records sharing K and B."""

    def __init__(
        self,
        records: Sequence[LogitRecord],
        num_classes: int,
        num_exits: int,
        metadata: Optional[Dict[str, str]] = None,
    ) -> None:
        if not _is_index(num_classes) or num_classes < 2:
            raise DataError(
                f"Number of classes must be at least 2, got {num_classes!r}."
            )
        if not _is_index(num_exits) or num_exits < 1:
            raise DataError(f"Number of exits must be at least 1, got {num_exits!r}.")
        seen = set()
        for record in records:
            if record.num_classes != num_classes or record.num_exits != num_exits:
                raise DataError(
                    f"Sample {record.sample_id} has K={record.num_classes}, "
                    f"B={record.num_exits}; expected K={num_classes}, B={num_exits}."
                )
            if record.sample_id in seen:
                raise DataError(f"Duplicate sample id {record.sample_id}.")
            seen.add(record.sample_id)
        self._records = tuple(records)
        self._num_classes = int(num_classes)
        self._num_exits = int(num_exits)
        self._metadata = {str(k): str(v) for k, v in (metadata or {}).items()}
        self._logits: Optional[np.ndarray] = None
        self._labels: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(
        cls,
        sample_ids: Sequence[int],
        labels: Any,
        logits: Any,
        metadata: Optional[Dict[str, str]] = None,
    ) -> "TraceDataset":
        """Build a dataset from an (N,) label array and an (N, B, K) logit array."""
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 3:
            raise DataError("Logits must be an (N, B, K) array.")
        labels = np.asarray(labels)
        if len(sample_ids) != logits.shape[0] or labels.shape != (logits.shape[0],):
            raise DataError("Sample ids, labels and logits disagree on N.")
        records = [
            LogitRecord(int(i), int(y), z)
            for i, y, z in zip(sample_ids, labels, logits)
        ]
        return cls(records, logits.shape[2], logits.shape[1], metadata)

    @property
    def records(self) -> Sequence[LogitRecord]:
        return self._records

    @property
    def num_classes(self) -> int:
        return self._num_classes

    @property
    def num_exits(self) -> int:
        return self._num_exits

    @property
    def metadata(self) -> Dict[str, str]:
        return dict(self._metadata)

    @property
    def sample_ids(self) -> List[int]:
        return [r.sample_id for r in self._records]

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            labels = np.array([r.label for r in self._records], dtype=np.int64)
            labels.flags.writeable = False
            self._labels = labels
        return self._labels

    @property
    def logits(self) -> np.ndarray:
        """All logits as a read-only (N, B, K) array."""
        if self._logits is None:
            if self._records:
                logits = np.stack([r.logits for r in self._records])
            else:
                logits = np.empty((0, self._num_exits, self._num_classes))
            logits.flags.writeable = False
            self._logits = logits
        return self._logits

    def logits_at_exit(self, exit_index: int) -> np.ndarray:
        if not 1 <= exit_index <= self._num_exits:
            raise ProgrammingError(
                f"Exit {exit_index} is out of range [1, {self._num_exits}]."
            )
        return self.logits[:, exit_index - 1, :]

    def take(
        self, indices: Sequence[int], metadata: Optional[Dict[str, str]] = None
    ) -> "TraceDataset":
        return TraceDataset(
            [self._records[i] for i in indices],
            self._num_classes,
            self._num_exits,
            self._metadata if metadata is None else metadata,
        )

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[LogitRecord]:
        return iter(self._records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceDataset):
            return NotImplemented
        return (
            self._num_classes == other._num_classes
            and self._num_exits == other._num_exits
            and self._metadata == other._metadata
            and self._records == other._records
        )

    def __repr__(self) -> str:
        return (
            f"TraceDataset(n={len(self)}, num_classes={self._num_classes}, "
            f"num_exits={self._num_exits})"
        )


class DatasetSplit(object):
    def __init__(self, validation: TraceDataset, test: TraceDataset, seed: int) -> None:
        overlap = set(validation.sample_ids) & set(test.sample_ids)
        if overlap:
            raise DataError(f"Validation and test share {len(overlap)} sample ids.")
        self._validation = validation
        self._test = test
        self._seed = seed

    @property
    def validation(self) -> TraceDataset:
        return self._validation

    @property
    def test(self) -> TraceDataset:
        return self._test

    @property
    def seed(self) -> int:
        return self._seed
