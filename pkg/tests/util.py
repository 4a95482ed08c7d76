# -*- coding: utf-8 -*-
import functools
import tempfile

from pyoffload.cascade import ExitDecision


def with_tempdir(fn):
    @functools.wraps(fn)
    def wrapped_fn(self, *args, **kwargs):
        with tempfile.TemporaryDirectory(prefix="pyoffload-test-") as tempdir:
            fn(self, tempdir, *args, **kwargs)

    return wrapped_fn


def decision(sample_id, exit_index=1, on_device=True, correct=True, confidence=0.9):
    """A hand-made decision; class 0 is always the prediction."""
    return ExitDecision(
        sample_id=sample_id,
        exit_index=exit_index,
        predicted_class=0,
        confidence=confidence,
        on_device=on_device,
        label=0 if correct else 1,
    )


def decisions(count, correct, **kwargs):
    """``count`` decisions of which the first ``correct`` are right."""
    return [decision(i, correct=i < correct, **kwargs) for i in range(count)]
