# -*- coding: utf-8 -*-
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence

from pyoffload import DEFAULT_BATCH_SIZE, DEFAULT_VALIDATION_FRACTION
from pyoffload.confidence import ConfidenceRule, EntropyRule, get_rule
from pyoffload.error import DataError, ProgrammingError
from pyoffload.latency import AGGREGATIONS, LatencyProfile
from pyoffload.metrics import ACCURACY_SCOPES
from pyoffload.util import load_document

_logger = logging.getLogger(__name__)  # type: ignore

_ENV_CONFIG_DIR: str = "PYOFFLOAD_CONFIG_DIR"


def config_dir() -> Optional[str]:
    return os.getenv(_ENV_CONFIG_DIR, None)


def resolve_path(path: str) -> str:
    """``path`` as given when it exists or is absolute, otherwise relative to
    ``$PYOFFLOAD_CONFIG_DIR`` when that holds it."""
    if os.path.isabs(path) or os.path.exists(path):
        return path
    base = config_dir()
    if base:
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            _logger.debug("Resolved %s against %s.", path, base)
            return candidate
    return path


def _check_probability(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProgrammingError(f"`{name}` must be a number, got {value!r}.")
    if not 0.0 < value < 1.0:
        raise ProgrammingError(f"`{name}` must be in (0, 1), got {value}.")
    return float(value)


def _check_grid(values: Any, name: str, check: Any) -> Optional[List[float]]:
    if values is None:
        return None
    if not isinstance(values, (list, tuple)) or not values:
        raise ProgrammingError(f"`{name}` must be a non-empty list.")
    return [check(v, name) for v in values]


def _check_deadline(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProgrammingError(f"`{name}` must be a number, got {value!r}.")
    if math.isnan(value) or value <= 0:
        raise ProgrammingError(f"`{name}` must be positive, got {value}.")
    return float(value)


def _check_int(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ProgrammingError(
            f"`{name}` must be an integer >= {minimum}, got {value!r}."
        )
    return value


def _check_flag(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ProgrammingError(f"`{name}` must be true or false, got {value!r}.")
    return value


def _check_path(value: Any, name: str) -> Optional[str]:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ProgrammingError(f"`{name}` must be a path, got {value!r}.")
    return value


class ExperimentConfig(object):
    """Everything an experiment needs: the trace source, the latency profile,
    the policy and the report outputs.

    Exactly one of ``trace`` (a JSONL path) and ``generator`` (a generator
    table) must be given. Temperatures come from ``temperatures``, from a
    ``calibration`` JSON file, or are fitted on the validation split."""

    KEYS: Sequence[str] = (
        "trace",
        "generator",
        "profile",
        "latency",
        "p_tar",
        "p_tar_grid",
        "t_tar",
        "t_tar_grid",
        "temperatures",
        "calibrate",
        "calibration",
        "confidence_rule",
        "entropy_threshold",
        "device_exit_count",
        "batch_size",
        "validation_fraction",
        "seed",
        "drop_partial_batch",
        "aggregation",
        "accuracy_scope",
        "branch_restricted",
        "max_workers",
        "output",
        "json_output",
        "decisions_output",
        "reliability_output",
    )

    def __init__(
        self,
        trace: Optional[str] = None,
        generator: Optional[Dict[str, Any]] = None,
        profile: Optional[str] = None,
        latency: Optional[Dict[str, Any]] = None,
        p_tar: Optional[float] = None,
        p_tar_grid: Optional[Sequence[float]] = None,
        t_tar: Optional[float] = None,
        t_tar_grid: Optional[Sequence[float]] = None,
        temperatures: Optional[Sequence[float]] = None,
        calibrate: bool = True,
        calibration: Optional[str] = None,
        confidence_rule: str = "max-probability",
        entropy_threshold: Optional[float] = None,
        device_exit_count: Optional[int] = None,
        batch_size: int = DEFAULT_BATCH_SIZE,
        validation_fraction: float = DEFAULT_VALIDATION_FRACTION,
        seed: int = 0,
        drop_partial_batch: bool = False,
        aggregation: str = "mean",
        accuracy_scope: str = "total",
        branch_restricted: bool = False,
        max_workers: int = 1,
        output: Optional[str] = None,
        json_output: Optional[str] = None,
        decisions_output: Optional[str] = None,
        reliability_output: Optional[str] = None,
    ) -> None:
        if (trace is None) == (generator is None):
            raise ProgrammingError(
                "Exactly one of `trace` and `generator` is required."
            )
        self.trace = _check_path(trace, "trace")
        if generator is not None:
            if not isinstance(generator, dict):
                raise ProgrammingError("`generator` must be a table.")
            if "seed" in generator:
                raise ProgrammingError(
                    "Set the top-level `seed`; generator seeds are derived from it."
                )
        self.generator = dict(generator) if generator is not None else None
        if profile is not None and latency is not None:
            raise ProgrammingError("Give either a `profile` path or a `latency` table.")
        self.profile = _check_path(profile, "profile")
        self.latency = dict(latency) if latency is not None else None

        self.p_tar = None if p_tar is None else _check_probability(p_tar, "p_tar")
        self.p_tar_grid = _check_grid(p_tar_grid, "p_tar_grid", _check_probability)
        self.t_tar = None if t_tar is None else _check_deadline(t_tar, "t_tar")
        self.t_tar_grid = _check_grid(t_tar_grid, "t_tar_grid", _check_deadline)

        if temperatures is not None and calibration is not None:
            raise ProgrammingError(
                "Give either `temperatures` or a `calibration` file."
            )
        self.temperatures = _check_grid(temperatures, "temperatures", _check_deadline)
        self.calibrate = _check_flag(calibrate, "calibrate")
        self.calibration = _check_path(calibration, "calibration")

        self.confidence_rule = confidence_rule
        self.entropy_threshold = entropy_threshold
        if entropy_threshold is not None and confidence_rule != EntropyRule.name:
            raise ProgrammingError(
                "`entropy_threshold` needs the entropy confidence rule."
            )
        self.rule: ConfidenceRule = get_rule(confidence_rule, entropy_threshold)
        self.device_exit_count = (
            None
            if device_exit_count is None
            else _check_int(device_exit_count, "device_exit_count", 1)
        )
        self.batch_size = _check_int(batch_size, "batch_size", 1)
        self.validation_fraction = _check_probability(
            validation_fraction, "validation_fraction"
        )
        self.seed = _check_int(seed, "seed", 0)
        self.drop_partial_batch = _check_flag(drop_partial_batch, "drop_partial_batch")
        if aggregation not in AGGREGATIONS:
            raise ProgrammingError(
                f"`aggregation` must be one of {list(AGGREGATIONS)}, "
                f"got {aggregation!r}."
            )
        self.aggregation = aggregation
        if accuracy_scope not in ACCURACY_SCOPES:
            raise ProgrammingError(
                f"`accuracy_scope` must be one of {list(ACCURACY_SCOPES)}, "
                f"got {accuracy_scope!r}."
            )
        self.accuracy_scope = accuracy_scope
        self.branch_restricted = _check_flag(branch_restricted, "branch_restricted")
        self.max_workers = _check_int(max_workers, "max_workers", 1)
        self.output = _check_path(output, "output")
        self.json_output = _check_path(json_output, "json_output")
        self.decisions_output = _check_path(decisions_output, "decisions_output")
        self.reliability_output = _check_path(reliability_output, "reliability_output")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "ExperimentConfig":
        unknown = set(obj) - set(cls.KEYS)
        if unknown:
            raise ProgrammingError(f"Unknown config keys: {sorted(unknown)}.")
        return cls(**obj)

    def to_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in self.KEYS}

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """A copy with the given non-None values replaced."""
        values = self.to_dict()
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
        if overrides.get("trace") is not None:
            values["generator"] = None
        if overrides.get("generator") is not None:
            values["trace"] = None
        if overrides.get("profile") is not None:
            values["latency"] = None
        return ExperimentConfig.from_dict(values)

    def load_profile(self) -> Optional[LatencyProfile]:
        if self.profile is not None:
            return LatencyProfile.from_file(resolve_path(self.profile))
        if self.latency is not None:
            return LatencyProfile.from_dict(self.latency)
        return None

    def __repr__(self) -> str:
        if self.trace:
            source = f"trace={self.trace!r}"
        else:
            source = f"generator={self.generator!r}"
        return (
            f"ExperimentConfig({source}, seed={self.seed}, "
            f"batch_size={self.batch_size})"
        )


def load_config(path: str, **overrides: Any) -> ExperimentConfig:
    """Load a ``.toml`` or ``.json`` experiment config; non-None ``overrides``
    win over file values."""
    resolved = resolve_path(path)
    try:
        document = load_document(resolved)
    except DataError as e:
        raise ProgrammingError(str(e)) from e
    values = {**document}
    # Input paths in the file may also be relative to the file itself.
    base = os.path.dirname(resolved)
    for key in ("trace", "profile", "calibration"):
        value = values.get(key, None)
        if (
            isinstance(value, str)
            and not os.path.isabs(value)
            and not os.path.exists(value)
        ):
            candidate = os.path.join(base, value)
            if os.path.exists(candidate):
                values[key] = candidate
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if overrides.get("trace") is not None:
        values.pop("generator", None)
    if overrides.get("generator") is not None:
        values.pop("trace", None)
    if overrides.get("profile") is not None:
        values.pop("latency", None)
    _logger.info("Loaded experiment config %s.", resolved)
    return ExperimentConfig.from_dict(values)
