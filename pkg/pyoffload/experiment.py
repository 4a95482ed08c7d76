# -*- coding: utf-8 -*-
import json
import logging
from typing import Any, Dict, List, Optional

import numpy as np

from pyoffload.calibration import (
    CalibrationResult,
    ReliabilityCurve,
    fit_exit_temperatures,
    reliability_curve,
)
from pyoffload.cascade import ExitDecision, ExitPolicy, run_cascade
from pyoffload.config import ExperimentConfig, resolve_path
from pyoffload.error import DataError, ProgrammingError
from pyoffload.latency import LatencyProfile
from pyoffload.metrics import DeadlineSpec, ExperimentReport, evaluate, sweep
from pyoffload.model import DatasetSplit, TraceDataset
from pyoffload.syngen.generator import generate, generator_from_dict
from pyoffload.trace import read_trace, split_dataset
from pyoffload.util import derive_seed, read_bytes

_logger = logging.getLogger(__name__)  # type: ignore

# Validation samples needed before a restricted calibration set is used.
MIN_RESTRICTED_SAMPLES: int = 2


class SimulationResult(object):
    def __init__(
        self,
        reports: List[ExperimentReport],
        conventional_decisions: List[ExitDecision],
        calibrated_decisions: Optional[List[ExitDecision]],
        calibration: Optional[List[CalibrationResult]],
        reliability: Optional[ReliabilityCurve],
    ) -> None:
        self.reports = reports
        self.conventional_decisions = conventional_decisions
        self.calibrated_decisions = calibrated_decisions
        self.calibration = calibration
        self.reliability = reliability

    @property
    def decisions(self) -> List[ExitDecision]:
        """Decisions of the calibrated run when there is one."""
        if self.calibrated_decisions is not None:
            return self.calibrated_decisions
        return self.conventional_decisions


def load_calibration(path: str) -> List[CalibrationResult]:
    raw = read_bytes(resolve_path(path))
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise DataError(f"Malformed calibration file `{path}`: {e}") from e
    if not isinstance(obj, list) or not obj:
        raise DataError(f"Calibration file `{path}` must hold a non-empty JSON array.")
    return [CalibrationResult.from_dict(o) for o in obj]


class Experiment(object):
    """One experiment over a trace: seeded split, calibration on the validation
    side and cascade evaluation on the test side."""

    def __init__(self, config: ExperimentConfig) -> None:
        self._config = config
        self._dataset: Optional[TraceDataset] = None
        self._split: Optional[DatasetSplit] = None
        self._profile: Optional[LatencyProfile] = None
        self._profile_loaded = False

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def split_seed(self) -> int:
        return derive_seed(self._config.seed, "split")

    @property
    def generator_seed(self) -> int:
        return derive_seed(self._config.seed, "generate")

    def load_trace(self) -> TraceDataset:
        if self._dataset is None:
            if self._config.trace is not None:
                self._dataset = read_trace(resolve_path(self._config.trace))
            else:
                cfg = generator_from_dict(self._config.generator, self.generator_seed)
                self._dataset = generate(cfg)
        return self._dataset

    def split(self) -> DatasetSplit:
        if self._split is None:
            self._split = split_dataset(
                self.load_trace(), self._config.validation_fraction, self.split_seed
            )
        return self._split

    def profile(self) -> Optional[LatencyProfile]:
        if not self._profile_loaded:
            self._profile = self._config.load_profile()
            self._profile_loaded = True
        return self._profile

    def _device_exit_count(self) -> Optional[int]:
        if self._config.device_exit_count is not None:
            return self._config.device_exit_count
        profile = self.profile()
        return profile.device_exit_count if profile else None

    def _p_tar(self) -> float:
        if self._config.p_tar is not None:
            return self._config.p_tar
        if self._config.p_tar_grid:
            return self._config.p_tar_grid[0]
        raise ProgrammingError("A target confidence `p_tar` is required.")

    def policy(
        self, p_tar: float, temperatures: Optional[List[float]] = None
    ) -> ExitPolicy:
        num_exits = self.load_trace().num_exits
        return ExitPolicy(
            p_tar,
            temperatures if temperatures is not None else [1.0] * num_exits,
            self._config.rule,
            self._device_exit_count(),
        )

    def _restricted_masks(self, validation: TraceDataset) -> List[np.ndarray]:
        """Per exit, the validation samples the conventional policy sends there
        (for the final exit: every sample that reaches it)."""
        decisions = run_cascade(
            validation, self.policy(self._p_tar()), self._config.max_workers
        )
        exits = np.array([d.exit_index for d in decisions])
        num_exits = validation.num_exits
        masks = []
        for i in range(1, num_exits + 1):
            mask = exits == i
            if int(mask.sum()) < MIN_RESTRICTED_SAMPLES:
                _logger.warning(
                    "Only %d validation samples exit at %d; calibrating it on all "
                    "%d samples.",
                    int(mask.sum()),
                    i,
                    len(validation),
                )
                mask = np.ones(len(validation), dtype=bool)
            masks.append(mask)
        return masks

    def calibrate(self) -> List[CalibrationResult]:
        validation = self.split().validation
        masks = None
        if self._config.branch_restricted:
            masks = self._restricted_masks(validation)
        results = fit_exit_temperatures(validation, sample_masks=masks)
        _logger.info(
            "Calibrated %d exits: T=%s.",
            len(results),
            ", ".join(f"{r.temperature:.4g}" for r in results),
        )
        return results

    def calibration_results(self) -> Optional[List[CalibrationResult]]:
        """Calibration results from the configured source, or None when the
        run stays conventional."""
        if self._config.temperatures is not None:
            return None
        if self._config.calibration is not None:
            return load_calibration(self._config.calibration)
        if self._config.calibrate:
            return self.calibrate()
        return None

    def _calibrated_temperatures(
        self, calibration: Optional[List[CalibrationResult]]
    ) -> Optional[List[float]]:
        if self._config.temperatures is not None:
            temps = list(self._config.temperatures)
        elif calibration is not None:
            temps = [r.temperature for r in calibration]
        else:
            return None
        num_exits = self.load_trace().num_exits
        if len(temps) != num_exits:
            raise ProgrammingError(
                f"Got {len(temps)} temperatures for a trace with {num_exits} exits."
            )
        return temps

    def _metadata(self) -> Dict[str, Any]:
        split = self.split()
        return {
            "split": "test",
            "seed": self._config.seed,
            "split_seed": split.seed,
            "validation_fraction": self._config.validation_fraction,
            "validation_samples": len(split.validation),
            "source": self._config.trace or "generator",
        }

    def _deadline(self) -> Optional[DeadlineSpec]:
        return DeadlineSpec(self._config.t_tar) if self._config.t_tar else None

    def simulate(self) -> SimulationResult:
        """Conventional and calibrated runs of the cascade on the test split."""
        config = self._config
        test = self.split().test
        p_tar = self._p_tar()
        profile = self.profile()
        calibration = self.calibration_results()
        temperatures = self._calibrated_temperatures(calibration)
        metadata = self._metadata()

        conventional = run_cascade(test, self.policy(p_tar), config.max_workers)
        runs = [(False, self.policy(p_tar), conventional)]
        calibrated = None
        if temperatures is not None:
            policy = self.policy(p_tar, temperatures)
            calibrated = run_cascade(test, policy, config.max_workers)
            runs.append((True, policy, calibrated))

        reports = [
            evaluate(
                decisions,
                policy,
                batch_size=config.batch_size,
                profile=profile,
                deadline=self._deadline(),
                drop_partial_batch=config.drop_partial_batch,
                aggregation=config.aggregation,
                accuracy_scope=config.accuracy_scope,
                calibrated=is_calibrated,
                metadata=metadata,
            )
            for is_calibrated, policy, decisions in runs
        ]
        on_device = [d for d in runs[-1][2] if d.on_device]
        reliability = None
        if on_device:
            reliability = reliability_curve(
                [d.confidence for d in on_device], [d.correct for d in on_device]
            )
        return SimulationResult(
            reports, conventional, calibrated, calibration, reliability
        )

    def sweep(self) -> List[ExperimentReport]:
        """Conventional rows, then calibrated rows; each block p_tar outer and
        t_tar inner."""
        config = self._config
        if not config.p_tar_grid or not config.t_tar_grid:
            raise ProgrammingError("A sweep needs `p_tar_grid` and `t_tar_grid`.")
        profile = self.profile()
        if profile is None:
            raise ProgrammingError("A sweep needs a latency profile.")
        test = self.split().test
        metadata = self._metadata()
        template = self.policy(config.p_tar_grid[0])
        blocks = [(False, template)]
        temperatures = self._calibrated_temperatures(self.calibration_results())
        if temperatures is not None:
            blocks.append((True, template.with_temperatures(temperatures)))
        reports: List[ExperimentReport] = []
        for is_calibrated, policy in blocks:
            reports.extend(
                sweep(
                    test,
                    policy,
                    config.p_tar_grid,
                    config.t_tar_grid,
                    profile,
                    batch_size=config.batch_size,
                    max_workers=config.max_workers,
                    drop_partial_batch=config.drop_partial_batch,
                    aggregation=config.aggregation,
                    accuracy_scope=config.accuracy_scope,
                    calibrated=is_calibrated,
                    metadata=metadata,
                )
            )
        return reports
