import sys

import numpy as np
import pytest

from dhs.complex import build_complex
from dhs.manifold import circle_backend, sphere_backend


@pytest.fixture(scope="session")
def s2_backend():
    return sphere_backend(2, samples=3)


@pytest.fixture(scope="session")
def s2_complex(s2_backend):
    return build_complex(s2_backend)


@pytest.fixture(scope="session")
def circle64():
    return circle_backend(samples=64)


@pytest.fixture(scope="session")
def circle64_complex(circle64):
    return build_complex(circle64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num][1])
