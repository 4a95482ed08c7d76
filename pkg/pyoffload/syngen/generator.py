# -*- coding: utf-8 -*-
"""Synthetic logit traces with known calibration ground truth.

``oracle`` mode draws a posterior q from a symmetric Dirichlet, a label from q
and emits a single exit with logits ``s * log q``, so ``softmax(z / s) == q``
and the NLL-optimal temperature is ``s``.

``cascade`` mode draws a uniform label and gives every exit its own noisy
logits ``s_i * (b_i * onehot(y) + eps_i)`` with ``eps_i ~ N(0, sigma_i^2)``.
The Bayes posterior of such an exit is ``softmax(b_i * x / sigma_i^2)``, so
its ideal temperature is ``s_i * sigma_i^2 / b_i``.

All draws come from one PCG64 stream (``numpy.random.default_rng``) in a fixed
order, which makes a trace a pure function of its config.
"""
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from pyoffload.error import DataError, ProgrammingError
from pyoffload.latency import LatencyProfile, illustrative_profile
from pyoffload.model import TraceDataset

_logger = logging.getLogger(__name__)  # type: ignore

LOG_FLOOR: float = -700.0
MODE_ORACLE: str = "oracle"
MODE_CASCADE: str = "cascade"

_BRANCH_REQUIRED = frozenset(("b", "sigma"))
_BRANCH_KEYS = frozenset(("b", "sigma", "s"))


def _check_positive(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProgrammingError(f"`{name}` must be a number, got {value!r}.")
    if not math.isfinite(value) or value <= 0:
        raise ProgrammingError(f"`{name}` must be positive, got {value}.")
    return float(value)


def _check_count(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ProgrammingError(
            f"`{name}` must be an integer >= {minimum}, got {value!r}."
        )
    return value


def _check_seed(seed: Any) -> int:
    return _check_count(seed, "seed", 0)


class OracleGenConfig(object):
    def __init__(
        self,
        num_classes: int,
        num_samples: int,
        dirichlet_concentration: float = 1.0,
        miscalibration_scale: float = 1.0,
        seed: int = 0,
    ) -> None:
        self.num_classes = _check_count(num_classes, "num_classes", 2)
        self.num_samples = _check_count(num_samples, "num_samples", 1)
        self.dirichlet_concentration = _check_positive(
            dirichlet_concentration, "dirichlet_concentration"
        )
        self.miscalibration_scale = _check_positive(
            miscalibration_scale, "miscalibration_scale"
        )
        self.seed = _check_seed(seed)

    @property
    def metadata(self) -> Dict[str, str]:
        return {
            "mode": MODE_ORACLE,
            "k": str(self.num_classes),
            "n": str(self.num_samples),
            "alpha": repr(self.dirichlet_concentration),
            "s": repr(self.miscalibration_scale),
            "seed": str(self.seed),
        }


class BranchGenConfig(object):
    def __init__(
        self,
        signal_strength: float,
        noise_sigma: float,
        miscalibration_scale: float = 1.0,
    ) -> None:
        if isinstance(signal_strength, bool) or not isinstance(
            signal_strength, (int, float)
        ):
            raise ProgrammingError(
                f"`signal_strength` must be a number, got {signal_strength!r}."
            )
        if not math.isfinite(signal_strength) or signal_strength < 0:
            raise ProgrammingError(
                f"`signal_strength` must be non-negative, got {signal_strength}."
            )
        self.signal_strength = float(signal_strength)
        self.noise_sigma = _check_positive(noise_sigma, "noise_sigma")
        self.miscalibration_scale = _check_positive(
            miscalibration_scale, "miscalibration_scale"
        )

    @classmethod
    def calibrated(cls, snr: float, scale: float = 1.0) -> "BranchGenConfig":
        """A branch with signal-to-noise ratio ``snr`` whose logits are
        calibrated at ``scale`` 1 (b = sigma^2)."""
        snr = _check_positive(snr, "snr")
        return cls(
            signal_strength=snr * snr, noise_sigma=snr, miscalibration_scale=scale
        )

    @classmethod
    def from_dict(cls, obj: Any) -> "BranchGenConfig":
        if not isinstance(obj, dict) or not (
            _BRANCH_REQUIRED <= set(obj) <= _BRANCH_KEYS
        ):
            raise DataError(
                f"Branch must be a table with `b`, `sigma` and `s`, got {obj!r}."
            )
        return cls(obj["b"], obj["sigma"], obj.get("s", 1.0))

    @property
    def ground_truth_temperature(self) -> float:
        if self.signal_strength == 0:
            return math.inf
        return self.miscalibration_scale * self.noise_sigma ** 2 / self.signal_strength

    def to_dict(self) -> Dict[str, float]:
        return {
            "b": self.signal_strength,
            "sigma": self.noise_sigma,
            "s": self.miscalibration_scale,
        }

    def __repr__(self) -> str:
        return (
            f"BranchGenConfig(b={self.signal_strength}, sigma={self.noise_sigma}, "
            f"s={self.miscalibration_scale})"
        )


class CascadeGenConfig(object):
    def __init__(
        self,
        num_classes: int,
        num_samples: int,
        branches: Sequence[BranchGenConfig],
        seed: int = 0,
    ) -> None:
        self.num_classes = _check_count(num_classes, "num_classes", 2)
        self.num_samples = _check_count(num_samples, "num_samples", 1)
        if not branches:
            raise ProgrammingError("A cascade needs at least one branch.")
        self.branches: List[BranchGenConfig] = list(branches)
        self.seed = _check_seed(seed)

    @property
    def metadata(self) -> Dict[str, str]:
        metadata = {
            "mode": MODE_CASCADE,
            "k": str(self.num_classes),
            "n": str(self.num_samples),
            "seed": str(self.seed),
        }
        for i, branch in enumerate(self.branches, start=1):
            metadata[f"branch{i}"] = (
                f"b={branch.signal_strength!r},sigma={branch.noise_sigma!r},"
                f"s={branch.miscalibration_scale!r}"
            )
        return metadata


def gen_oracle_trace(cfg: OracleGenConfig) -> TraceDataset:
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.num_samples, cfg.num_classes
    gammas = rng.standard_gamma(cfg.dirichlet_concentration, size=(n, k))
    totals = gammas.sum(axis=1, keepdims=True)
    # All-zero rows only appear when every Gamma draw underflows.
    q = np.where(totals > 0, gammas / np.where(totals > 0, totals, 1.0), 1.0 / k)
    u = rng.random(n)
    labels = np.minimum((np.cumsum(q, axis=1) < u[:, np.newaxis]).sum(axis=1), k - 1)
    with np.errstate(divide="ignore"):
        log_q = np.maximum(np.log(q), LOG_FLOOR)
    logits = cfg.miscalibration_scale * log_q
    dataset = TraceDataset.from_arrays(
        list(range(n)), labels, logits[:, np.newaxis, :], cfg.metadata
    )
    _logger.info(
        "Generated oracle trace: n=%d, k=%d, s=%g.", n, k, cfg.miscalibration_scale
    )
    return dataset


def gen_cascade_trace(cfg: CascadeGenConfig) -> TraceDataset:
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.num_samples, cfg.num_classes
    labels = rng.integers(0, k, size=n)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    logits = np.empty((n, len(cfg.branches), k))
    for i, branch in enumerate(cfg.branches):
        noise = rng.normal(0.0, branch.noise_sigma, size=(n, k))
        logits[:, i, :] = branch.miscalibration_scale * (
            branch.signal_strength * onehot + noise
        )
    dataset = TraceDataset.from_arrays(list(range(n)), labels, logits, cfg.metadata)
    _logger.info(
        "Generated cascade trace: n=%d, k=%d, b=%d.", n, k, len(cfg.branches)
    )
    return dataset


class Scenario(object):
    """A named demo cascade with its illustrative latency profile."""

    def __init__(
        self,
        name: str,
        num_classes: int,
        branches: Sequence[BranchGenConfig],
        device_exit_count: int,
    ) -> None:
        self.name = name
        self.num_classes = num_classes
        self.branches = list(branches)
        self.device_exit_count = device_exit_count

    def config(self, num_samples: int = 10000, seed: int = 0) -> CascadeGenConfig:
        return CascadeGenConfig(self.num_classes, num_samples, self.branches, seed)

    def profile(self) -> LatencyProfile:
        return illustrative_profile(self.device_exit_count)


# Device branches report logits three times too sharp; the cloud exit is
# calibrated.
SCENARIOS: Dict[str, Scenario] = {
    "one-branch": Scenario(
        "one-branch",
        10,
        [BranchGenConfig.calibrated(2.0, scale=3.0), BranchGenConfig.calibrated(3.0)],
        device_exit_count=1,
    ),
    "two-branch": Scenario(
        "two-branch",
        10,
        [
            BranchGenConfig.calibrated(2.0, scale=3.0),
            BranchGenConfig.calibrated(2.5, scale=3.0),
            BranchGenConfig.calibrated(3.0),
        ],
        device_exit_count=2,
    ),
}


def get_scenario(name: str) -> Scenario:
    scenario = SCENARIOS.get(name, None)
    if not scenario:
        raise ProgrammingError(
            f"Unknown scenario `{name}`; expected one of {sorted(SCENARIOS)}."
        )
    return scenario


GenConfig = Union[OracleGenConfig, CascadeGenConfig]


def generator_from_dict(obj: Any, seed: Optional[int] = None) -> GenConfig:
    """Build a generator config from a ``[generator]`` table.

    ``mode = "oracle"`` takes ``k``, ``n``, ``alpha`` and ``s``;
    ``mode = "cascade"`` takes ``k``, ``n`` and either a ``branches`` list of
    ``{b, sigma, s}`` tables or a ``scenario`` name. ``seed`` overrides any
    seed in the table."""
    if not isinstance(obj, dict):
        raise DataError(f"Generator config must be a table, got {obj!r}.")
    obj = dict(obj)
    mode = obj.pop("mode", MODE_CASCADE if "scenario" in obj else None)
    table_seed = obj.pop("seed", 0)
    seed = table_seed if seed is None else seed
    if mode == MODE_ORACLE:
        unknown = set(obj) - {"k", "n", "alpha", "s"}
        if unknown or not {"k", "n"} <= set(obj):
            raise DataError(
                f"Oracle generator takes k, n, alpha and s, got {sorted(obj)}."
            )
        return OracleGenConfig(
            obj["k"], obj["n"], obj.get("alpha", 1.0), obj.get("s", 1.0), seed
        )
    if mode == MODE_CASCADE:
        if "scenario" in obj:
            unknown = set(obj) - {"scenario", "n"}
            if unknown:
                raise DataError(
                    f"Unknown scenario generator fields: {sorted(unknown)}."
                )
            return get_scenario(obj["scenario"]).config(obj.get("n", 10000), seed)
        unknown = set(obj) - {"k", "n", "branches"}
        if unknown or not {"k", "n", "branches"} <= set(obj):
            raise DataError(
                f"Cascade generator takes k, n and branches, got {sorted(obj)}."
            )
        if not isinstance(obj["branches"], list):
            raise DataError("`branches` must be a list of tables.")
        branches = [BranchGenConfig.from_dict(b) for b in obj["branches"]]
        return CascadeGenConfig(obj["k"], obj["n"], branches, seed)
    raise DataError(f"Unknown generator mode {mode!r}; expected oracle or cascade.")


def generate(cfg: GenConfig) -> TraceDataset:
    if isinstance(cfg, OracleGenConfig):
        return gen_oracle_trace(cfg)
    return gen_cascade_trace(cfg)
