# -*- coding: utf-8 -*-
import json
import textwrap
import unittest

from pyoffload import ProgrammingError
from pyoffload.calibration import CalibrationResult, ReliabilityBin
from pyoffload.cascade import ExitDecision
from pyoffload.formatter import (
    DECISION_COLUMNS,
    REPORT_COLUMNS,
    CsvFormatter,
    JsonFormatter,
    as_pandas,
)
from pyoffload.metrics import ExperimentReport
from tests.util import decision


def _report(p_tar=0.85, t_tar=None, device_accuracy=None, outage=None):
    return ExperimentReport(
        p_tar=p_tar,
        t_tar=t_tar,
        calibrated=False,
        temperatures=[1.0, 1.0],
        device_classification_probability=0.5,
        offloading_probability=0.5,
        device_accuracy=device_accuracy,
        cloud_accuracy=0.75,
        total_accuracy=0.75,
        device_mean_confidence=None,
        outage_probability=outage,
        outage_batches_counted=0 if outage is None else 1,
        missed_deadline_probability=None,
        per_batch=[],
    )


class TestCsvFormatter(unittest.TestCase):
    def setUp(self):
        self.formatter = CsvFormatter()

    def test_decisions(self):
        expected = textwrap.dedent(
            """\
            sample_id,exit_index,on_device,predicted,label,confidence,correct
            0,1,true,0,0,0.9,true
            1,2,false,0,1,0.5,false
            """
        )
        actual = self.formatter.format(
            [
                decision(0),
                decision(
                    1, exit_index=2, on_device=False, correct=False, confidence=0.5
                ),
            ]
        )
        self.assertEqual(actual, expected)

    def test_reports(self):
        expected = ",".join(REPORT_COLUMNS) + "\n0.85,,false,0.5,,0.75,,0,\n"
        self.assertEqual(self.formatter.format([_report()]), expected)

    def test_reliability_bins(self):
        actual = self.formatter.format([ReliabilityBin(0.25, 0.5, 4)])
        self.assertEqual(actual, "bin_mean_conf,accuracy,count\n0.25,0.5,4\n")

    def test_header_only(self):
        self.assertEqual(
            self.formatter.format([], ExitDecision), ",".join(DECISION_COLUMNS) + "\n"
        )
        self.assertEqual(
            self.formatter.format([], ExperimentReport), ",".join(REPORT_COLUMNS) + "\n"
        )

    def test_unknown_type(self):
        with self.assertRaises(ProgrammingError):
            self.formatter.format([])
        with self.assertRaises(ProgrammingError):
            self.formatter.format([object()])
        with self.assertRaises(ProgrammingError):
            self.formatter.format(["x"], ExitDecision)

    def test_remove(self):
        self.formatter.remove(ExitDecision)
        with self.assertRaises(ProgrammingError):
            self.formatter.format([decision(0)])
        self.assertIsNotNone(CsvFormatter().get(ExitDecision))


class TestJsonFormatter(unittest.TestCase):
    def test_calibration_results(self):
        actual = json.loads(
            JsonFormatter().format([CalibrationResult(2.5, 1.2, 0.9, False, 3000)])
        )
        self.assertEqual(
            actual,
            [
                {
                    "t": 2.5,
                    "nll_before": 1.2,
                    "nll_after": 0.9,
                    "clamped": False,
                    "n": 3000,
                }
            ],
        )

    def test_report(self):
        text = JsonFormatter(indent=None).format([_report(t_tar=0.03)])
        self.assertTrue(text.endswith("\n"))
        [actual] = json.loads(text)
        self.assertEqual(actual["t_tar"], 0.03)
        self.assertIsNone(actual["device_acc"])
        self.assertIsNone(actual["outage_prob"])
        self.assertEqual(actual["temperatures"], [1.0, 1.0])

    def test_decisions(self):
        [actual] = json.loads(JsonFormatter().format([decision(4, correct=False)]))
        self.assertEqual(actual["sample_id"], 4)
        self.assertFalse(actual["correct"])
        self.assertTrue(actual["on_device"])

    def test_set(self):
        formatter = JsonFormatter(indent=None)
        formatter.set(ExitDecision, lambda f, v: [v.sample_id, v.exit_index])
        actual = formatter.format([decision(4), decision(5, exit_index=2)])
        self.assertEqual(actual, "[[4, 1], [5, 2]]\n")
        [default] = json.loads(JsonFormatter().format([decision(4)]))
        self.assertEqual(default["sample_id"], 4)

    def test_update(self):
        formatter = JsonFormatter(indent=None)
        formatter.update(
            {
                str: lambda f, v: v.upper(),
                ExitDecision: lambda f, v: None,
            }
        )
        self.assertEqual(formatter.format(["on", decision(0)]), '["ON", null]\n')
        self.assertIsNone(formatter.get(int))
        self.assertIsNone(JsonFormatter().get(str))


class TestAsPandas(unittest.TestCase):
    def test_as_pandas(self):
        df = as_pandas([_report(0.8, 0.02, 0.9, 0.0), _report(0.9, 0.02)])
        self.assertEqual(
            list(df.columns),
            REPORT_COLUMNS + ["offload_prob", "cloud_acc", "device_mean_conf"],
        )
        self.assertEqual(len(df), 2)
        self.assertEqual(list(df["p_tar"]), [0.8, 0.9])
        self.assertEqual(df["device_acc"][0], 0.9)
        self.assertTrue(df["device_acc"].isna()[1])
