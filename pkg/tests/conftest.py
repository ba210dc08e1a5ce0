import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dagrelu import kernels
from dagrelu.dag import random_dag

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(params=kernels.available())
def backend(request):
    """Runs a test once per available kernel backend."""
    prev = kernels.backend()
    kernels.use(request.param)
    yield request.param
    kernels.use(prev)


@st.composite
def dags(draw, max_inputs=3, max_hidden=6, max_outputs=2, io_edges=True):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_dag(
        rng,
        draw(st.integers(1, max_inputs)),
        draw(st.integers(1, max_hidden)),
        draw(st.integers(1, max_outputs)),
        p=draw(st.sampled_from([0.2, 0.35, 0.5, 0.8])),
        allow_io_edges=io_edges and draw(st.booleans()),
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
