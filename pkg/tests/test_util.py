# -*- coding: utf-8 -*-
import errno
import logging
import os
import stat
import unittest

from pyoffload import DataError, OperationalError, ProgrammingError
from pyoffload.util import (
    RetryConfig,
    atomic_write,
    derive_seed,
    get_chunks,
    load_document,
    read_bytes,
    retry_file_operation,
)
from tests import CONFIG_PATH
from tests.util import with_tempdir


class TestUtil(unittest.TestCase):
    def test_get_chunks(self):
        chunks = list(get_chunks(list(range(7000)), 512))
        self.assertEqual(len(chunks), 14)
        self.assertEqual([len(c) for c in chunks[:13]], [512] * 13)
        self.assertEqual(len(chunks[-1]), 344)
        self.assertEqual([x for c in chunks for x in c], list(range(7000)))

        self.assertEqual(list(get_chunks([1, 2, 3, 4], 2)), [[1, 2], [3, 4]])
        self.assertEqual(list(get_chunks([1, 2, 3])), [[1, 2, 3]])
        self.assertEqual(list(get_chunks([], 3)), [])
        with self.assertRaises(ProgrammingError):
            list(get_chunks([1, 2, 3], 0))

    def test_derive_seed(self):
        self.assertEqual(derive_seed(0, "split"), derive_seed(0, "split"))
        self.assertNotEqual(derive_seed(0, "split"), derive_seed(0, "generate"))
        self.assertNotEqual(derive_seed(0, "split"), derive_seed(1, "split"))
        seed = derive_seed(42, "split")
        self.assertTrue(0 <= seed < 2 ** 64)
        with self.assertRaises(ProgrammingError):
            derive_seed(-1, "split")

    @with_tempdir
    def test_atomic_write(self, tempdir):
        path = os.path.join(tempdir, "report.csv")
        atomic_write(path, "a,b\n1,2\n")
        self.assertEqual(read_bytes(path), b"a,b\n1,2\n")
        atomic_write(path, b"replaced\n")
        self.assertEqual(read_bytes(path), b"replaced\n")
        self.assertEqual(stat.S_IMODE(os.stat(path).st_mode), 0o644)
        self.assertEqual(os.listdir(tempdir), ["report.csv"])

    @with_tempdir
    def test_atomic_write_missing_directory(self, tempdir):
        path = os.path.join(tempdir, "missing", "report.csv")
        with self.assertRaises(OperationalError):
            atomic_write(path, "a\n")

    @with_tempdir
    def test_read_bytes_missing_file(self, tempdir):
        with self.assertRaises(OperationalError):
            read_bytes(os.path.join(tempdir, "missing.jsonl"))

    def test_retry_file_operation(self):
        calls = []

        def busy_twice():
            calls.append(1)
            if len(calls) < 3:
                raise OSError(errno.EBUSY, "busy")
            return "done"

        config = RetryConfig(multiplier=0.001, max_delay=0.01)
        self.assertEqual(retry_file_operation(busy_twice, config), "done")
        self.assertEqual(len(calls), 3)

    def test_retry_file_operation_logs_attempts(self):
        calls = []

        def busy_once():
            calls.append(1)
            if len(calls) < 2:
                raise OSError(errno.EBUSY, "busy")
            return "done"

        config = RetryConfig(multiplier=0.001, max_delay=0.01)
        logger = logging.getLogger("pyoffload.util")
        with self.assertLogs(logger, level="DEBUG") as cm:
            self.assertEqual(retry_file_operation(busy_once, config, logger), "done")
        self.assertEqual(len(cm.records), 1)
        self.assertEqual(cm.records[0].levelno, logging.DEBUG)
        self.assertIn("busy_once", cm.output[0])

    def test_retry_file_operation_not_retryable(self):
        calls = []

        def missing():
            calls.append(1)
            raise OSError(errno.ENOENT, "missing")

        with self.assertRaises(OSError):
            retry_file_operation(missing, RetryConfig(multiplier=0.001))
        self.assertEqual(len(calls), 1)

    def test_retry_file_operation_gives_up(self):
        calls = []

        def always_busy():
            calls.append(1)
            raise OSError(errno.EBUSY, "busy")

        with self.assertRaises(OSError):
            retry_file_operation(
                always_busy, RetryConfig(attempt=2, multiplier=0.001, max_delay=0.01)
            )
        self.assertEqual(len(calls), 2)

    def test_load_document(self):
        toml = load_document(os.path.join(CONFIG_PATH, "profile_one_branch.toml"))
        self.assertEqual(toml["device_segment_delays"], [0.010])
        self.assertEqual(toml["partition_output_bytes"], 57600)
        data = load_document(os.path.join(CONFIG_PATH, "profile_two_branch.json"))
        self.assertEqual(data["device_segment_delays"], [0.010, 0.012])

        with self.assertRaises(DataError):
            load_document(os.path.join(CONFIG_PATH, "malformed.toml"))
        with self.assertRaises(ProgrammingError):
            load_document(os.path.join(CONFIG_PATH, "experiment.yaml"))

    @with_tempdir
    def test_load_document_not_a_table(self, tempdir):
        path = os.path.join(tempdir, "list.json")
        atomic_write(path, "[1, 2, 3]\n")
        with self.assertRaises(DataError):
            load_document(path)
