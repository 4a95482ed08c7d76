# -*- coding: utf-8 -*-
"""End-to-end behaviour of the shipped demo scenarios: overconfident device
branches, temperatures fitted on the validation split, metrics on the test
split."""
import unittest

import numpy as np

from pyoffload.cascade import ExitPolicy, ExitScores
from pyoffload.metrics import DeadlineSpec, evaluate
from pyoffload.syngen.generator import get_scenario
from pyoffload.trace import select_exits
from tests import WithScenario


def _non_increasing(values):
    return all(a >= b for a, b in zip(values, values[1:]))


def _outage(testcase, report):
    # Every scenario point leaves some samples on the device in each batch.
    testcase.assertIsNotNone(report.outage_probability)
    return report.outage_probability


class TestOneBranchScenario(unittest.TestCase, WithScenario):
    def setUp(self):
        self.test = self.split().test
        self.conventional = ExitPolicy.conventional(2, 0.85)
        self.calibrated = self.conventional.with_temperatures(self.temperatures())
        self.conventional_scores = ExitScores(self.test, self.conventional)
        self.calibrated_scores = ExitScores(self.test, self.calibrated)

    def _reports(self, p_tar, **kwargs):
        return (
            evaluate(
                self.conventional_scores.decide(p_tar),
                self.conventional.with_p_tar(p_tar),
                **kwargs,
            ),
            evaluate(
                self.calibrated_scores.decide(p_tar),
                self.calibrated.with_p_tar(p_tar),
                **kwargs,
            ),
        )

    def test_device_branch_is_overconfident(self):
        device, cloud = self.temperatures()
        self.assertGreater(device, 1.0)
        self.assertAlmostEqual(device, 3.0, delta=0.4)
        self.assertAlmostEqual(cloud, 1.0, delta=0.2)

    def test_calibration_offloads_more(self):
        conventional, calibrated = [], []
        for p_tar in np.linspace(0.5, 0.95, 20):
            a, b = self._reports(float(p_tar))
            conventional.append(a.device_classification_probability)
            calibrated.append(b.device_classification_probability)
        self.assertTrue(_non_increasing(conventional), conventional)
        self.assertTrue(_non_increasing(calibrated), calibrated)
        for a, b in zip(conventional, calibrated):
            self.assertLessEqual(b, a)

    def test_calibration_meets_accuracy_target(self):
        lower_outage = False
        for p_tar in np.round(np.arange(0.75, 0.905, 0.01), 2):
            conventional, calibrated = self._reports(float(p_tar))
            self.assertGreaterEqual(
                calibrated.device_accuracy, conventional.device_accuracy
            )
            outages = _outage(self, conventional), _outage(self, calibrated)
            self.assertLessEqual(outages[1], outages[0])
            lower_outage |= outages[1] < outages[0]
        self.assertTrue(lower_outage)

    def test_operating_point(self):
        conventional, calibrated = self._reports(0.85)
        self.assertLess(conventional.device_accuracy, 0.85)
        self.assertEqual(conventional.outage_probability, 1.0)
        self.assertGreaterEqual(calibrated.device_accuracy, 0.85)
        self.assertLessEqual(_outage(self, calibrated), 0.1)

    def test_deadline(self):
        profile = get_scenario("one-branch").profile()
        conventional, calibrated = [], []
        for t_tar in np.linspace(0.005, 0.06, 12):
            a, b = self._reports(
                0.85, profile=profile, deadline=DeadlineSpec(float(t_tar))
            )
            conventional.append(a.missed_deadline_probability)
            calibrated.append(b.missed_deadline_probability)
        self.assertTrue(_non_increasing(conventional), conventional)
        self.assertTrue(_non_increasing(calibrated), calibrated)
        self.assertEqual(calibrated[0], 1.0)
        for a, b in zip(conventional, calibrated):
            if b < 0.2:
                self.assertLessEqual(b, a)
        self.assertLess(calibrated[-1], 0.2)


class TestTwoBranchScenario(unittest.TestCase, WithScenario):
    P_TAR = 0.85

    def setUp(self):
        self.test = self.split("two-branch").test
        self.one_branch = select_exits(self.test, [1, 3])
        temperatures = self.temperatures("two-branch")
        self.temperatures_two = temperatures
        self.temperatures_one = (temperatures[0], temperatures[2])

    def _outage(self, dataset, temperatures, device_exit_count):
        policy = ExitPolicy(
            self.P_TAR, temperatures, "max-probability", device_exit_count
        )
        decisions = ExitScores(dataset, policy).decide()
        return _outage(self, evaluate(decisions, policy))

    def test_conventional(self):
        two = self._outage(self.test, [1.0] * 3, 2)
        one = self._outage(self.one_branch, [1.0] * 2, 1)
        self.assertGreaterEqual(two, one)

    def test_calibrated(self):
        two = self._outage(self.test, self.temperatures_two, 2)
        one = self._outage(self.one_branch, self.temperatures_one, 1)
        self.assertLessEqual(two, one + 0.05)

    def test_selected_exits(self):
        self.assertEqual(self.one_branch.num_exits, 2)
        self.assertEqual(self.one_branch.metadata["selected_exits"], "1,3")
        np.testing.assert_array_equal(
            self.one_branch.logits_at_exit(2), self.test.logits_at_exit(3)
        )
