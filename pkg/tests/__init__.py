# -*- coding: utf-8 -*-
import functools
import os
from typing import Tuple

import numpy as np

from pyoffload.calibration import fit_exit_temperatures
from pyoffload.model import DatasetSplit, TraceDataset
from pyoffload.syngen.generator import generate, get_scenario
from pyoffload.trace import split_dataset
from pyoffload.util import derive_seed

BASE_PATH = os.path.dirname(os.path.abspath(__file__))
CONFIG_PATH = os.path.join(BASE_PATH, "config")
CONF_PATH = os.path.join(os.path.dirname(BASE_PATH), "conf")

SEED = 2021
NUM_SAMPLES = 10000
VALIDATION_FRACTION = 0.3


@functools.lru_cache(maxsize=None)
def scenario_trace(name: str) -> TraceDataset:
    cfg = get_scenario(name).config(NUM_SAMPLES, derive_seed(SEED, "generate"))
    return generate(cfg)


@functools.lru_cache(maxsize=None)
def scenario_split(name: str) -> DatasetSplit:
    return split_dataset(
        scenario_trace(name), VALIDATION_FRACTION, derive_seed(SEED, "split")
    )


@functools.lru_cache(maxsize=None)
def scenario_temperatures(name: str) -> Tuple[float, ...]:
    results = fit_exit_temperatures(scenario_split(name).validation)
    return tuple(r.temperature for r in results)


def random_dataset(
    seed: int, num_samples: int, num_exits: int, num_classes: int, scale: float = 3.0
) -> TraceDataset:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=num_samples)
    logits = rng.normal(0.0, scale, size=(num_samples, num_exits, num_classes))
    return TraceDataset.from_arrays(list(range(num_samples)), labels, logits)


class WithScenario(object):
    def trace(self, name: str = "one-branch") -> TraceDataset:
        return scenario_trace(name)

    def split(self, name: str = "one-branch") -> DatasetSplit:
        return scenario_split(name)

    def temperatures(self, name: str = "one-branch") -> Tuple[float, ...]:
        return scenario_temperatures(name)
