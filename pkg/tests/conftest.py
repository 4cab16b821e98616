import numpy as np
import pytest

from adaptcp.engines import run_one_type
from adaptcp.torus import TorusSpec


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile/load the jitted kernels once so per-test timings are honest
    run_one_type(TorusSpec(1, 4), 1.0, np.ones(4), 0.5, 0, record_events=False)
    yield
