import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("cnnae", deadline=None, max_examples=60)
settings.load_profile("cnnae")


@pytest.fixture(scope="session")
def default_records():
    from cnnae.dataset import GeneratorConfig, generate_synthetic
    return generate_synthetic(GeneratorConfig.load())


@pytest.fixture(scope="session")
def default_data(default_records):
    from cnnae.dataset import encode_all
    return encode_all(default_records)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
