# -*- coding: utf-8 -*-
import json
import logging
from abc import ABCMeta, abstractmethod
from copy import deepcopy
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type, TypeVar

import pandas as pd

from pyoffload.calibration import CalibrationResult, ReliabilityBin
from pyoffload.cascade import ExitDecision
from pyoffload.error import ProgrammingError
from pyoffload.metrics import ExperimentReport

_logger = logging.getLogger(__name__)  # type: ignore
_T = TypeVar("_T", bound="Formatter")

DECISION_COLUMNS: List[str] = [
    "sample_id",
    "exit_index",
    "on_device",
    "predicted",
    "label",
    "confidence",
    "correct",
]
REPORT_COLUMNS: List[str] = [
    "p_tar",
    "t_tar",
    "calibrated",
    "device_prob",
    "device_acc",
    "total_acc",
    "outage_prob",
    "outage_batches",
    "missed_prob",
]
RELIABILITY_COLUMNS: List[str] = ["bin_mean_conf", "accuracy", "count"]


class Formatter(object, metaclass=ABCMeta):
    def __init__(
        self,
        mappings: Dict[Type[Any], Callable[[_T, Any], Any]],
        default: Optional[Callable[[_T, Any], Any]] = None,
    ) -> None:
        self._mappings = mappings
        self._default = default

    @property
    def mappings(self) -> Dict[Type[Any], Callable[[_T, Any], Any]]:
        return self._mappings

    def get(self, type_: Type[Any]) -> Optional[Callable[[_T, Any], Any]]:
        return self.mappings.get(type_, self._default)

    def set(self, type_: Type[Any], formatter: Callable[[_T, Any], Any]) -> None:
        self.mappings[type_] = formatter

    def remove(self, type_: Type[Any]) -> None:
        self.mappings.pop(type_, None)

    def update(self, mappings: Dict[Type[Any], Callable[[_T, Any], Any]]) -> None:
        self.mappings.update(mappings)

    def rows(self, items: Sequence[Any]) -> List[Any]:
        results = []
        for item in items:
            func = self.get(type(item))
            if not func:
                raise ProgrammingError(f"{type(item)} has no formatter.")
            results.append(func(self, item))
        return results

    @abstractmethod
    def format(
        self, items: Sequence[Any], item_type: Optional[Type[Any]] = None
    ) -> str:
        raise NotImplementedError  # pragma: no cover


def _csv_decision(formatter: Formatter, val: ExitDecision) -> Dict[str, Any]:
    return {
        "sample_id": val.sample_id,
        "exit_index": val.exit_index,
        "on_device": val.on_device,
        "predicted": val.predicted_class,
        "label": val.label,
        "confidence": val.confidence,
        "correct": val.correct,
    }


def _csv_report(formatter: Formatter, val: ExperimentReport) -> Dict[str, Any]:
    return {
        "p_tar": val.p_tar,
        "t_tar": val.t_tar,
        "calibrated": val.calibrated,
        "device_prob": val.device_classification_probability,
        "device_acc": val.device_accuracy,
        "total_acc": val.total_accuracy,
        "outage_prob": val.outage_probability,
        "outage_batches": val.outage_batches_counted,
        "missed_prob": val.missed_deadline_probability,
    }


def _csv_bin(formatter: Formatter, val: ReliabilityBin) -> Dict[str, Any]:
    return {
        "bin_mean_conf": val.mean_confidence,
        "accuracy": val.accuracy,
        "count": val.count,
    }


_CSV_COLUMNS: Dict[Type[Any], List[str]] = {
    ExitDecision: DECISION_COLUMNS,
    ExperimentReport: REPORT_COLUMNS,
    ReliabilityBin: RELIABILITY_COLUMNS,
}

_DEFAULT_CSV_FORMATTERS: Dict[Type[Any], Callable[[Formatter, Any], Any]] = {
    ExitDecision: _csv_decision,
    ExperimentReport: _csv_report,
    ReliabilityBin: _csv_bin,
}


_BOOLEAN_COLUMNS: Tuple[str, ...] = ("on_device", "correct", "calibrated")


def _to_frame(rows: List[Dict[str, Any]], columns: List[str]) -> "pd.DataFrame":
    df = pd.DataFrame(rows, columns=columns)
    for column in columns:
        if column in _BOOLEAN_COLUMNS:
            df[column] = df[column].map(lambda v: "true" if v else "false")
    return df


class CsvFormatter(Formatter):
    def __init__(self) -> None:
        super(CsvFormatter, self).__init__(
            mappings=deepcopy(_DEFAULT_CSV_FORMATTERS), default=None
        )

    def format(
        self, items: Sequence[Any], item_type: Optional[Type[Any]] = None
    ) -> str:
        item_type = item_type if item_type else (type(items[0]) if items else None)
        columns = _CSV_COLUMNS.get(item_type, None) if item_type else None
        if columns is None:
            raise ProgrammingError(f"No CSV columns defined for {item_type}.")
        df = _to_frame(self.rows(items), columns)
        return str(df.to_csv(index=False, lineterminator="\n"))


def _json_to_dict(formatter: Formatter, val: Any) -> Any:
    return val.to_dict()


_DEFAULT_JSON_FORMATTERS: Dict[Type[Any], Callable[[Formatter, Any], Any]] = {
    CalibrationResult: _json_to_dict,
    ExperimentReport: _json_to_dict,
    ExitDecision: _csv_decision,
    ReliabilityBin: _csv_bin,
}


class JsonFormatter(Formatter):
    def __init__(self, indent: Optional[int] = 2) -> None:
        super(JsonFormatter, self).__init__(
            mappings=deepcopy(_DEFAULT_JSON_FORMATTERS), default=None
        )
        self._indent = indent

    def format(
        self, items: Sequence[Any], item_type: Optional[Type[Any]] = None
    ) -> str:
        return json.dumps(self.rows(items), indent=self._indent) + "\n"


def as_pandas(reports: Sequence[ExperimentReport]) -> "pd.DataFrame":
    """Reports as a frame: the CSV columns plus offloading probability, cloud
    accuracy and mean on-device confidence."""
    rows = []
    for report in reports:
        row = _csv_report(CsvFormatter(), report)
        row.update(
            {
                "offload_prob": report.offloading_probability,
                "cloud_acc": report.cloud_accuracy,
                "device_mean_conf": report.device_mean_confidence,
            }
        )
        rows.append(row)
    columns = REPORT_COLUMNS + ["offload_prob", "cloud_acc", "device_mean_conf"]
    return pd.DataFrame(rows, columns=columns)
