# -*- coding: utf-8 -*-
import os
import unittest

from pyoffload import DataError, ProgrammingError
from pyoffload.latency import (
    LatencyProfile,
    batch_time,
    comm_delay,
    illustrative_profile,
    sample_latency,
    tensor_bytes,
)
from tests import CONF_PATH, CONFIG_PATH
from tests.util import decision


class TestCommDelay(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(comm_delay(0, 1e6), 0.0)
        self.assertEqual(comm_delay(1, 8.0), 1.0)
        expected = 460800 / 18.8e6
        actual = comm_delay(57600, 18.8e6)
        self.assertLessEqual(abs(actual - expected), 1e-12 * expected)
        self.assertAlmostEqual(actual, 0.0245106382978723, places=15)

    def test_invalid(self):
        with self.assertRaises(ProgrammingError):
            comm_delay(100, 0.0)
        with self.assertRaises(ProgrammingError):
            comm_delay(100, -1.0)
        with self.assertRaises(ProgrammingError):
            comm_delay(-1, 1e6)


class TestTensorBytes(unittest.TestCase):
    def test_tensor_bytes(self):
        self.assertEqual(tensor_bytes((64, 15, 15)), 57600)
        self.assertEqual(tensor_bytes((192, 7, 7), 4), 37632)
        self.assertEqual(tensor_bytes((10,), 2), 20)
        with self.assertRaises(ProgrammingError):
            tensor_bytes((-1, 3))


class TestSampleLatency(unittest.TestCase):
    def setUp(self):
        self.profile = LatencyProfile([0.010], 57600, 18.8e6, 0.002)

    def test_device_exit(self):
        breakdown = sample_latency(decision(0, exit_index=1), self.profile)
        self.assertEqual(breakdown.total_s, 0.010)
        self.assertEqual(breakdown.comm_s, 0.0)
        self.assertEqual(breakdown.cloud_s, 0.0)

    def test_cloud_exit(self):
        breakdown = sample_latency(
            decision(0, exit_index=2, on_device=False), self.profile
        )
        self.assertEqual(breakdown.device_s, 0.010)
        self.assertAlmostEqual(breakdown.comm_s, 0.0245106382978723, places=15)
        self.assertEqual(breakdown.cloud_s, 0.002)
        self.assertAlmostEqual(breakdown.total_s, 0.036511, places=6)
        self.assertEqual(
            breakdown.total_s, breakdown.device_s + breakdown.comm_s + breakdown.cloud_s
        )

    def test_fast_link(self):
        fast = self.profile.with_uplink_rate(1e15)
        breakdown = sample_latency(decision(0, exit_index=2, on_device=False), fast)
        self.assertAlmostEqual(breakdown.total_s, 0.012, places=9)

    def test_sequential_device_segments(self):
        profile = LatencyProfile([0.010, 0.012], 37632, 18.8e6, 0.002)
        device = sample_latency(decision(0, exit_index=2), profile)
        self.assertAlmostEqual(device.total_s, 0.022, places=12)
        cloud = sample_latency(decision(0, exit_index=3, on_device=False), profile)
        self.assertEqual(cloud.device_s, device.device_s)
        self.assertEqual(cloud.comm_s, comm_delay(37632, 18.8e6))

    def test_exit_outside_profile(self):
        with self.assertRaises(ProgrammingError):
            sample_latency(decision(0, exit_index=2), self.profile)
        with self.assertRaises(ProgrammingError):
            sample_latency(decision(0, exit_index=1, on_device=False), self.profile)

    def test_breakdowns_are_cached(self):
        a = self.profile.breakdown(2, False)
        self.assertIs(self.profile.breakdown(2, False), a)


class TestBatchTime(unittest.TestCase):
    def setUp(self):
        self.profile = LatencyProfile([0.010], 57600, 18.8e6, 0.002)
        self.batch = [
            decision(0, exit_index=1),
            decision(1, exit_index=2, on_device=False),
        ]

    def test_aggregation(self):
        cloud = 0.010 + comm_delay(57600, 18.8e6) + 0.002
        self.assertAlmostEqual(
            batch_time(self.batch, self.profile), (0.010 + cloud) / 2
        )
        self.assertAlmostEqual(
            batch_time(self.batch, self.profile, "sum"), 0.010 + cloud
        )
        with self.assertRaises(ProgrammingError):
            batch_time(self.batch, self.profile, "max")
        with self.assertRaises(ProgrammingError):
            batch_time([], self.profile)

    def test_uplink_rate(self):
        device_only = [decision(i, exit_index=1) for i in range(4)]
        slow = self.profile.with_uplink_rate(1e5)
        self.assertEqual(
            batch_time(device_only, self.profile), batch_time(device_only, slow)
        )
        times = [
            batch_time(self.batch, self.profile.with_uplink_rate(rate))
            for rate in (1e5, 1e6, 1e7, 1e8)
        ]
        self.assertEqual(times, sorted(times, reverse=True))

    def test_offloading_costs_more(self):
        device_only = [decision(i, exit_index=1) for i in range(2)]
        self.assertLess(
            batch_time(device_only, self.profile), batch_time(self.batch, self.profile)
        )


class TestLatencyProfile(unittest.TestCase):
    def test_from_file(self):
        toml = LatencyProfile.from_file(
            os.path.join(CONFIG_PATH, "profile_one_branch.toml")
        )
        self.assertEqual(toml, LatencyProfile([0.010], 57600, 18.8e6, 0.002, 4))
        self.assertEqual(toml.device_exit_count, 1)
        data = LatencyProfile.from_file(
            os.path.join(CONFIG_PATH, "profile_two_branch.json")
        )
        self.assertEqual(data.device_segment_delays, (0.010, 0.012))
        self.assertEqual(data.element_bytes, 4)

    def test_from_dict(self):
        profile = illustrative_profile(2)
        self.assertEqual(LatencyProfile.from_dict(profile.to_dict()), profile)
        with self.assertRaises(DataError):
            LatencyProfile.from_file(
                os.path.join(CONFIG_PATH, "profile_unknown_field.toml")
            )
        with self.assertRaises(DataError):
            LatencyProfile.from_dict({"device_segment_delays": [0.01]})
        with self.assertRaises(DataError):
            LatencyProfile.from_dict([0.01])
        invalid = profile.to_dict()
        invalid["uplink_rate_bps"] = 0
        with self.assertRaises(DataError):
            LatencyProfile.from_dict(invalid)
        invalid = profile.to_dict()
        invalid["device_segment_delays"] = 0.01
        with self.assertRaises(DataError):
            LatencyProfile.from_dict(invalid)

    def test_invalid(self):
        with self.assertRaises(ProgrammingError):
            LatencyProfile([], 100, 1e6, 0.0)
        with self.assertRaises(ProgrammingError):
            LatencyProfile([-0.01], 100, 1e6, 0.0)
        with self.assertRaises(ProgrammingError):
            LatencyProfile([0.01], -100, 1e6, 0.0)
        with self.assertRaises(ProgrammingError):
            LatencyProfile([0.01], 100, float("nan"), 0.0)
        with self.assertRaises(ProgrammingError):
            LatencyProfile([0.01], 100, 1e6, float("inf"))
        with self.assertRaises(ProgrammingError):
            LatencyProfile([0.01], 100, 1e6, 0.0, element_bytes=0)

    def test_illustrative(self):
        one = illustrative_profile(1)
        self.assertEqual(one.partition_output_bytes, 57600)
        self.assertAlmostEqual(one.uplink_rate_bps, 18.8e6, places=3)
        self.assertEqual(one.cloud_delay_s, 0.002)
        self.assertEqual(illustrative_profile(2).partition_output_bytes, 37632)
        self.assertEqual(illustrative_profile(1, 5e6).uplink_rate_bps, 5e6)
        with self.assertRaises(ProgrammingError):
            illustrative_profile(3)

    def test_shipped_profiles(self):
        for device_exit_count, name in (
            (1, "illustrative-one-branch.toml"),
            (2, "illustrative-two-branch.toml"),
        ):
            with self.subTest(name=name):
                profile = LatencyProfile.from_file(os.path.join(CONF_PATH, name))
                self.assertEqual(profile, illustrative_profile(device_exit_count))
                self.assertEqual(profile.device_exit_count, device_exit_count)
