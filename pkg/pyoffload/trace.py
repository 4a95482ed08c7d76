# -*- coding: utf-8 -*-
"""JSON-Lines logit traces.

Line 1 is a header ``{"k": K, "b": B, "meta": {...}}``; every following line is
one sample ``{"id": int, "label": int, "logits": [[float; K]; B]}``. Logits are
written with 17 significant digits so that a parse of a serialized dataset
reproduces every float64 exactly.
"""
import json
import logging
import math
import os
from typing import IO, Any, Dict, List, NoReturn, Sequence, Union

import numpy as np

from pyoffload.error import DataError, ProgrammingError
from pyoffload.model import DatasetSplit, LogitRecord, TraceDataset
from pyoffload.util import atomic_write, get_chunks, read_bytes

_logger = logging.getLogger(__name__)  # type: ignore

_HEADER_KEYS = {"k", "b", "meta"}
_RECORD_KEYS = {"id", "label", "logits"}


def _reject_constant(value: str) -> NoReturn:
    raise ValueError(f"non-finite constant {value}")


def _load_line(line: str, line_no: int) -> Dict[str, Any]:
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except ValueError as e:
        raise DataError(f"Line {line_no}: malformed JSON ({e}).") from e
    if not isinstance(obj, dict):
        raise DataError(f"Line {line_no}: expected a JSON object.")
    return obj


def _to_int(value: Any, name: str, line_no: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DataError(f"Line {line_no}: `{name}` must be an integer, got {value!r}.")
    return value


def _to_logits(value: Any, k: int, b: int, line_no: int) -> List[List[float]]:
    if not isinstance(value, list) or len(value) != b:
        raise DataError(f"Line {line_no}: expected {b} logit vectors.")
    logits = []
    for vector in value:
        if not isinstance(vector, list) or len(vector) != k:
            size = len(vector) if isinstance(vector, list) else "a non-list"
            raise DataError(
                f"Line {line_no}: logit vector has {size} elements, expected {k}."
            )
        row = []
        for v in vector:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise DataError(f"Line {line_no}: logit {v!r} is not a number.")
            f = float(v)
            if not math.isfinite(f):
                raise DataError(f"Line {line_no}: non-finite logit.")
            row.append(f)
        logits.append(row)
    return logits


def parse_trace(stream: Union[bytes, str, IO[bytes]]) -> TraceDataset:
    if hasattr(stream, "read"):
        stream = stream.read()  # type: ignore
    if isinstance(stream, bytes):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError("Trace is not valid UTF-8.") from e
    lines = str(stream).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError("Line 1: missing header.")

    header = _load_line(lines[0], 1)
    if set(header) != _HEADER_KEYS:
        raise DataError(f"Line 1: header keys must be {sorted(_HEADER_KEYS)}.")
    k = _to_int(header["k"], "k", 1)
    b = _to_int(header["b"], "b", 1)
    if k < 2 or b < 1:
        raise DataError(f"Line 1: invalid dimensions k={k}, b={b}.")
    if not isinstance(header["meta"], dict):
        raise DataError("Line 1: `meta` must be an object.")
    metadata = {str(key): str(val) for key, val in header["meta"].items()}

    records = []
    seen = set()
    for line_no, line in enumerate(lines[1:], start=2):
        obj = _load_line(line, line_no)
        if set(obj) != _RECORD_KEYS:
            raise DataError(
                f"Line {line_no}: record keys must be {sorted(_RECORD_KEYS)}."
            )
        sample_id = _to_int(obj["id"], "id", line_no)
        label = _to_int(obj["label"], "label", line_no)
        if sample_id < 0:
            raise DataError(f"Line {line_no}: negative sample id {sample_id}.")
        if not 0 <= label < k:
            raise DataError(f"Line {line_no}: label {label} out of range [0, {k}).")
        if sample_id in seen:
            raise DataError(f"Line {line_no}: duplicate sample id {sample_id}.")
        seen.add(sample_id)
        logits = _to_logits(obj["logits"], k, b, line_no)
        records.append(LogitRecord(sample_id, label, logits))

    dataset = TraceDataset(records, k, b, metadata)
    _logger.info("Parsed trace: n=%d, k=%d, b=%d.", len(dataset), k, b)
    return dataset


def _format_vector(vector: np.ndarray) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in vector) + "]"


def serialize_trace(dataset: TraceDataset) -> bytes:
    header = {
        "k": dataset.num_classes,
        "b": dataset.num_exits,
        "meta": dict(sorted(dataset.metadata.items())),
    }
    lines = [json.dumps(header)]
    for record in dataset:
        logits = ", ".join(_format_vector(v) for v in record.logits)
        lines.append(
            f'{{"id": {record.sample_id}, "label": {record.label}, '
            f'"logits": [{logits}]}}'
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_trace(path: Union[str, "os.PathLike[str]"]) -> TraceDataset:
    return parse_trace(read_bytes(path))


def write_trace(path: Union[str, "os.PathLike[str]"], dataset: TraceDataset) -> None:
    atomic_write(path, serialize_trace(dataset))


def split_dataset(
    dataset: TraceDataset, validation_fraction: float, seed: int
) -> DatasetSplit:
    """Seeded shuffle, then the first round(fraction * N) samples form the
    validation side (rounding half up). Both sides keep the shuffled order."""
    n = len(dataset)
    if n < 2:
        raise ProgrammingError(f"Cannot split a dataset of {n} records.")
    if not 0.0 < validation_fraction < 1.0:
        raise ProgrammingError(
            f"Validation fraction must be in (0, 1), got {validation_fraction}."
        )
    n_validation = int(math.floor(validation_fraction * n + 0.5))
    if n_validation == 0 or n_validation == n:
        raise ProgrammingError(
            f"Validation fraction {validation_fraction} leaves an empty side for n={n}."
        )
    order = np.random.default_rng(seed).permutation(n)
    metadata = dataset.metadata
    split = DatasetSplit(
        validation=dataset.take(
            order[:n_validation].tolist(), {**metadata, "split": "validation"}
        ),
        test=dataset.take(order[n_validation:].tolist(), {**metadata, "split": "test"}),
        seed=seed,
    )
    _logger.info(
        "Split %d records into %d validation / %d test (seed=%d).",
        n,
        len(split.validation),
        len(split.test),
        seed,
    )
    return split


def batch_ids(
    dataset: TraceDataset, batch_size: int, drop_partial_batch: bool = False
) -> List[List[int]]:
    if batch_size < 1:
        raise ProgrammingError(f"Batch size must be at least 1, got {batch_size}.")
    batches = [list(chunk) for chunk in get_chunks(dataset.sample_ids, batch_size)]
    if drop_partial_batch and batches and len(batches[-1]) < batch_size:
        batches.pop()
    return batches


def select_exits(dataset: TraceDataset, exits: Sequence[int]) -> TraceDataset:
    """Keep only the given 1-based exits, e.g. to derive the one-branch
    counterpart of a two-branch trace. The final exit must be kept."""
    exits = list(exits)
    if not exits or exits != sorted(set(exits)):
        raise ProgrammingError(f"Exits must be strictly increasing, got {exits}.")
    if exits[0] < 1 or exits[-1] != dataset.num_exits:
        raise ProgrammingError(
            f"Exits must lie in [1, {dataset.num_exits}] and include the final exit."
        )
    columns = [e - 1 for e in exits]
    metadata = {**dataset.metadata, "selected_exits": ",".join(str(e) for e in exits)}
    records = [LogitRecord(r.sample_id, r.label, r.logits[columns]) for r in dataset]
    return TraceDataset(records, dataset.num_classes, len(exits), metadata)
