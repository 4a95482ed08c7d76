# -*- coding: utf-8 -*-
"""Parametric end-to-end latency of a partitioned early-exit network.

A sample leaving at device exit ``i`` pays the first ``i`` device segments.
An offloaded sample pays every device segment, the upload of the partition
tensor and the remaining cloud compute. Times are seconds, rates bits per
second and sizes bytes. Downlink of the result is not modelled.
"""
import logging
import math
import os
from functools import reduce
from operator import mul
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pyoffload import DEFAULT_ELEMENT_BYTES, MBPS
from pyoffload.cascade import ExitDecision
from pyoffload.error import DataError, ProgrammingError
from pyoffload.util import load_document

_logger = logging.getLogger(__name__)  # type: ignore

AGGREGATIONS: Tuple[str, ...] = ("mean", "sum")


def _check_delay(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProgrammingError(f"`{name}` must be a number, got {value!r}.")
    if not math.isfinite(value) or value < 0:
        raise ProgrammingError(
            f"`{name}` must be finite and non-negative, got {value}."
        )
    return float(value)


def tensor_bytes(
    shape: Sequence[int], element_bytes: int = DEFAULT_ELEMENT_BYTES
) -> int:
    """Size of a dense tensor, e.g. (64, 15, 15) float32 -> 57600."""
    if any(d < 0 for d in shape) or element_bytes < 1:
        raise ProgrammingError(f"Invalid tensor shape {tuple(shape)}.")
    return reduce(mul, shape, 1) * element_bytes


class LatencyBreakdown(object):
    def __init__(self, device_s: float, comm_s: float, cloud_s: float) -> None:
        self._device_s = device_s
        self._comm_s = comm_s
        self._cloud_s = cloud_s
        self._total_s = device_s + comm_s + cloud_s

    @property
    def device_s(self) -> float:
        return self._device_s

    @property
    def comm_s(self) -> float:
        return self._comm_s

    @property
    def cloud_s(self) -> float:
        return self._cloud_s

    @property
    def total_s(self) -> float:
        return self._total_s

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatencyBreakdown):
            return NotImplemented
        return (
            self._device_s == other._device_s
            and self._comm_s == other._comm_s
            and self._cloud_s == other._cloud_s
        )

    def __repr__(self) -> str:
        return (
            f"LatencyBreakdown(device_s={self._device_s:.6g}, "
            f"comm_s={self._comm_s:.6g}, "
            f"cloud_s={self._cloud_s:.6g}, total_s={self._total_s:.6g})"
        )


class LatencyProfile(object):

    FIELDS: Tuple[str, ...] = (
        "device_segment_delays",
        "partition_output_bytes",
        "uplink_rate_bps",
        "cloud_delay_s",
        "element_bytes",
    )

    def __init__(
        self,
        device_segment_delays: Sequence[float],
        partition_output_bytes: int,
        uplink_rate_bps: float,
        cloud_delay_s: float,
        element_bytes: int = DEFAULT_ELEMENT_BYTES,
    ) -> None:
        if not device_segment_delays:
            raise ProgrammingError("A profile needs at least one device segment.")
        self._device_segment_delays = tuple(
            _check_delay(d, "device_segment_delays") for d in device_segment_delays
        )
        if (
            isinstance(partition_output_bytes, bool)
            or not isinstance(partition_output_bytes, int)
            or partition_output_bytes < 0
        ):
            raise ProgrammingError(
                "`partition_output_bytes` must be a non-negative integer, "
                f"got {partition_output_bytes!r}."
            )
        if (
            isinstance(uplink_rate_bps, bool)
            or not isinstance(uplink_rate_bps, (int, float))
            or not uplink_rate_bps > 0
            or math.isnan(uplink_rate_bps)
        ):
            raise ProgrammingError(
                f"`uplink_rate_bps` must be positive, got {uplink_rate_bps!r}."
            )
        if isinstance(element_bytes, bool) or not isinstance(element_bytes, int):
            raise ProgrammingError(
                f"`element_bytes` must be an integer, got {element_bytes!r}."
            )
        if element_bytes < 1:
            raise ProgrammingError(
                f"`element_bytes` must be positive, got {element_bytes}."
            )
        self._partition_output_bytes = partition_output_bytes
        self._uplink_rate_bps = float(uplink_rate_bps)
        self._cloud_delay_s = _check_delay(cloud_delay_s, "cloud_delay_s")
        self._element_bytes = element_bytes
        self._breakdowns: Dict[int, LatencyBreakdown] = {}

    @classmethod
    def from_dict(cls, obj: Any) -> "LatencyProfile":
        if not isinstance(obj, dict):
            raise DataError(f"Latency profile must be a table, got {obj!r}.")
        unknown = set(obj) - set(cls.FIELDS)
        if unknown:
            raise DataError(f"Unknown latency profile fields: {sorted(unknown)}.")
        missing = set(cls.FIELDS[:4]) - set(obj)
        if missing:
            raise DataError(f"Missing latency profile fields: {sorted(missing)}.")
        delays = obj["device_segment_delays"]
        if not isinstance(delays, list):
            raise DataError("`device_segment_delays` must be a list of seconds.")
        try:
            return cls(**obj)
        except ProgrammingError as e:
            raise DataError(f"Invalid latency profile: {e}") from e

    @classmethod
    def from_file(cls, path: Union[str, "os.PathLike[str]"]) -> "LatencyProfile":
        profile = cls.from_dict(load_document(path))
        _logger.info("Loaded latency profile %s from %s.", profile, path)
        return profile

    def to_dict(self) -> Dict[str, Any]:
        return {
            "device_segment_delays": list(self._device_segment_delays),
            "partition_output_bytes": self._partition_output_bytes,
            "uplink_rate_bps": self._uplink_rate_bps,
            "cloud_delay_s": self._cloud_delay_s,
            "element_bytes": self._element_bytes,
        }

    @property
    def device_segment_delays(self) -> Tuple[float, ...]:
        return self._device_segment_delays

    @property
    def device_exit_count(self) -> int:
        return len(self._device_segment_delays)

    @property
    def partition_output_bytes(self) -> int:
        return self._partition_output_bytes

    @property
    def uplink_rate_bps(self) -> float:
        return self._uplink_rate_bps

    @property
    def cloud_delay_s(self) -> float:
        return self._cloud_delay_s

    @property
    def element_bytes(self) -> int:
        return self._element_bytes

    def with_uplink_rate(self, uplink_rate_bps: float) -> "LatencyProfile":
        return LatencyProfile(
            self._device_segment_delays,
            self._partition_output_bytes,
            uplink_rate_bps,
            self._cloud_delay_s,
            self._element_bytes,
        )

    def device_delay(self, exit_index: int) -> float:
        """Delay of the first ``exit_index`` device segments, summed in order."""
        total = 0.0
        for delay in self._device_segment_delays[:exit_index]:
            total += delay
        return total

    def breakdown(self, exit_index: int, on_device: bool) -> LatencyBreakdown:
        if on_device:
            if not 1 <= exit_index <= self.device_exit_count:
                raise ProgrammingError(
                    f"Device exit {exit_index} is not covered by a profile with "
                    f"{self.device_exit_count} device segments."
                )
            key = exit_index
        else:
            if exit_index <= self.device_exit_count:
                raise ProgrammingError(
                    f"Cloud exit {exit_index} lies within the profile's "
                    f"{self.device_exit_count} device segments."
                )
            key = 0
        cached = self._breakdowns.get(key, None)
        if cached is None:
            if key:
                cached = LatencyBreakdown(self.device_delay(key), 0.0, 0.0)
            else:
                cached = LatencyBreakdown(
                    self.device_delay(self.device_exit_count),
                    comm_delay(self._partition_output_bytes, self._uplink_rate_bps),
                    self._cloud_delay_s,
                )
            self._breakdowns[key] = cached
        return cached

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LatencyProfile):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"LatencyProfile("
            f"device_segment_delays={list(self._device_segment_delays)}, "
            f"partition_output_bytes={self._partition_output_bytes}, "
            f"uplink_rate_bps={self._uplink_rate_bps:g}, "
            f"cloud_delay_s={self._cloud_delay_s:g})"
        )


def comm_delay(payload_bytes: int, uplink_rate_bps: float) -> float:
    if not uplink_rate_bps > 0:
        raise ProgrammingError(f"Uplink rate must be positive, got {uplink_rate_bps}.")
    if payload_bytes < 0:
        raise ProgrammingError(f"Payload must be non-negative, got {payload_bytes}.")
    return 8 * payload_bytes / uplink_rate_bps


def sample_latency(decision: ExitDecision, profile: LatencyProfile) -> LatencyBreakdown:
    return profile.breakdown(decision.exit_index, decision.on_device)


def sample_totals(
    decisions: Sequence[ExitDecision], profile: LatencyProfile
) -> np.ndarray:
    return np.array(
        [profile.breakdown(d.exit_index, d.on_device).total_s for d in decisions],
        dtype=np.float64,
    )


def batch_time(
    decisions: Sequence[ExitDecision],
    profile: LatencyProfile,
    aggregation: str = "mean",
) -> float:
    if aggregation not in AGGREGATIONS:
        raise ProgrammingError(
            f"Unknown aggregation `{aggregation}`; "
            f"expected one of {list(AGGREGATIONS)}."
        )
    if not decisions:
        raise ProgrammingError("Cannot time an empty batch.")
    totals = sample_totals(decisions, profile)
    return float(np.mean(totals)) if aggregation == "mean" else float(np.sum(totals))


# Illustrative only: segment times in the range of a small CNN on a laptop
# CPU, partition tensors of an AlexNet-style trunk.
_ILLUSTRATIVE_SEGMENTS: List[float] = [0.010, 0.012]
_ILLUSTRATIVE_PARTITIONS: List[Tuple[int, ...]] = [(64, 15, 15), (192, 7, 7)]
ILLUSTRATIVE_UPLINK_RATE_BPS: float = 18.8 * MBPS
ILLUSTRATIVE_CLOUD_DELAY_S: float = 0.002


def illustrative_profile(
    device_exit_count: int = 1, uplink_rate_bps: Optional[float] = None
) -> LatencyProfile:
    """The shipped demo profile for one or two device branches."""
    if not 1 <= device_exit_count <= len(_ILLUSTRATIVE_SEGMENTS):
        raise ProgrammingError(
            "The illustrative profile covers 1 or 2 device exits, "
            f"got {device_exit_count}."
        )
    return LatencyProfile(
        device_segment_delays=_ILLUSTRATIVE_SEGMENTS[:device_exit_count],
        partition_output_bytes=tensor_bytes(
            _ILLUSTRATIVE_PARTITIONS[device_exit_count - 1], DEFAULT_ELEMENT_BYTES
        ),
        uplink_rate_bps=uplink_rate_bps or ILLUSTRATIVE_UPLINK_RATE_BPS,
        cloud_delay_s=ILLUSTRATIVE_CLOUD_DELAY_S,
        element_bytes=DEFAULT_ELEMENT_BYTES,
    )
