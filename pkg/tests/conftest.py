# -*- coding: utf-8 -*-
import os

import pytest

from tests import CONFIG_PATH

_ENV_CONFIG_DIR = "PYOFFLOAD_CONFIG_DIR"


@pytest.fixture(scope="session", autouse=True)
def _setup_session(request):
    previous = os.environ.get(_ENV_CONFIG_DIR, None)
    os.environ[_ENV_CONFIG_DIR] = CONFIG_PATH

    def _teardown_session():
        if previous is None:
            os.environ.pop(_ENV_CONFIG_DIR, None)
        else:
            os.environ[_ENV_CONFIG_DIR] = previous

    request.addfinalizer(_teardown_session)
