# -*- coding: utf-8 -*-
import math
import unittest
from types import SimpleNamespace

import numpy as np

from pyoffload import ProgrammingError
from pyoffload.cascade import ExitPolicy
from pyoffload.model import LogitRecord
from pyoffload.syngen.oracle import (
    brute_force_cascade,
    brute_force_temperature,
    dense_temperature_grid,
)


class TestDenseTemperatureGrid(unittest.TestCase):
    def test_grid(self):
        grid = dense_temperature_grid()
        self.assertEqual(len(grid), 19951)
        self.assertAlmostEqual(grid[0], 0.05)
        self.assertAlmostEqual(grid[-1], 20.0)
        np.testing.assert_allclose(np.diff(grid), 1e-3, rtol=1e-6)
        self.assertEqual(len(dense_temperature_grid(1.0, 2.0, 0.25)), 5)


class TestBruteForceTemperature(unittest.TestCase):
    def test_grid_minimum(self):
        logits = [[2.0, 0.0], [2.0, 0.0], [2.0, 0.0]]
        labels = [0, 0, 1]
        actual = brute_force_temperature(logits, labels, dense_temperature_grid())
        self.assertAlmostEqual(actual, 2 / math.log(2), delta=1e-3)

    def test_blocks(self):
        rng = np.random.default_rng(4)
        logits = rng.normal(0.0, 3.0, size=(200, 5))
        labels = rng.integers(0, 5, size=200)
        grid = dense_temperature_grid(0.5, 10.0, 0.01)
        self.assertEqual(
            brute_force_temperature(logits, labels, grid),
            brute_force_temperature(logits, labels, grid, max_block=1000),
        )

    def test_first_minimum_wins(self):
        # Equal logits make every temperature equally good.
        actual = brute_force_temperature([[0.0, 0.0]], [0], [0.5, 1.0, 2.0])
        self.assertEqual(actual, 0.5)

    def test_empty_grid(self):
        with self.assertRaises(ProgrammingError):
            brute_force_temperature([[1.0, 0.0]], [0], [])


class TestBruteForceCascade(unittest.TestCase):
    def test_zero_target_fires_first_exit(self):
        record = LogitRecord(5, 1, [[0.0, 0.0, 0.0], [0.0, 9.0, 0.0]])
        policy = SimpleNamespace(
            p_tar=0.0,
            temperatures=[1.0, 1.0],
            confidence_rule="max-probability",
            device_exit_count=1,
        )
        decision = brute_force_cascade(record, policy)
        self.assertEqual(decision.exit_index, 1)
        self.assertEqual(decision.predicted_class, 0)
        self.assertAlmostEqual(decision.confidence, 1 / 3)
        self.assertTrue(decision.on_device)
        self.assertFalse(decision.correct)

    def test_final_exit(self):
        record = LogitRecord(0, 1, [[0.0, 0.1], [0.0, 0.2]])
        decision = brute_force_cascade(record, ExitPolicy.conventional(2, 0.99))
        self.assertEqual(decision.exit_index, 2)
        self.assertFalse(decision.on_device)
        self.assertTrue(decision.correct)

    def test_entropy_rule(self):
        record = LogitRecord(0, 0, [[0.0, 0.0], [6.0, 0.0]])
        decision = brute_force_cascade(
            record, ExitPolicy(0.9, [1.0, 1.0], "entropy")
        )
        self.assertEqual(decision.exit_index, 2)
        self.assertGreater(decision.confidence, 0.9)
