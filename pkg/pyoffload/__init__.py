# -*- coding: utf-8 -*-
from typing import TYPE_CHECKING

from pyoffload.error import *  # noqa

if TYPE_CHECKING:
    from pyoffload.config import ExperimentConfig
    from pyoffload.experiment import Experiment

__version__: str = "0.3.0"

# Defaults shared by the library and the command line.
DEFAULT_BATCH_SIZE: int = 512
DEFAULT_VALIDATION_FRACTION: float = 0.3
DEFAULT_ELEMENT_BYTES: int = 4
MBPS: float = 1e6


def experiment(config: "ExperimentConfig") -> "Experiment":
    from pyoffload.experiment import Experiment

    return Experiment(config)
