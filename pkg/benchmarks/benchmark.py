#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import logging
import sys
import time

from pyoffload.calibration import fit_exit_temperatures
from pyoffload.cascade import ExitPolicy, decide_exit, run_cascade
from pyoffload.syngen.generator import generate, get_scenario
from pyoffload.syngen.oracle import brute_force_cascade

LOGGER = logging.getLogger(__name__)
LOGGER.addHandler(logging.StreamHandler(sys.stdout))
LOGGER.setLevel(logging.INFO)

SEED = 0
COUNT = 5

SMALL_TRACE = 10000
MEDIUM_TRACE = 100000
LARGE_TRACE = 1000000


def _timed(name, func, dataset):
    LOGGER.info(f"{name} ".ljust(48, "="))
    elapsed_times = []
    for i in range(0, COUNT):
        start = time.time()
        func(dataset)
        elapsed = time.time() - start
        LOGGER.info(f"loop:{i}\tcount:{len(dataset)}\telapsed:{elapsed}")
        elapsed_times.append(elapsed)
    LOGGER.info(f"Avg: {sum(elapsed_times) / COUNT}")
    LOGGER.info("=" * 48)


def run_vectorized_cascade(dataset, policy, max_workers=1):
    _timed(
        f"run_cascade (workers={max_workers})",
        lambda d: run_cascade(d, policy, max_workers),
        dataset,
    )


def run_per_record_cascade(dataset, policy):
    _timed("decide_exit", lambda d: [decide_exit(r, policy) for r in d], dataset)


def run_brute_force_cascade(dataset, policy):
    _timed(
        "brute_force_cascade",
        lambda d: [brute_force_cascade(r, policy) for r in d],
        dataset,
    )


def run_calibration(dataset):
    _timed("fit_exit_temperatures", fit_exit_temperatures, dataset)


def main():
    scenario = get_scenario("two-branch")
    policy = ExitPolicy(0.85, [3.0, 3.0, 1.0], device_exit_count=2)
    for num_samples in [SMALL_TRACE, MEDIUM_TRACE, LARGE_TRACE]:
        dataset = generate(scenario.config(num_samples, SEED))
        LOGGER.info(f"{scenario.name}: n={num_samples}")
        run_vectorized_cascade(dataset, policy)
        LOGGER.info("")
        run_vectorized_cascade(dataset, policy, max_workers=4)
        LOGGER.info("")
        run_calibration(dataset)
        LOGGER.info("")
        if num_samples <= MEDIUM_TRACE:
            run_per_record_cascade(dataset, policy)
            LOGGER.info("")
            run_brute_force_cascade(dataset, policy)
            LOGGER.info("")


if __name__ == "__main__":
    main()
