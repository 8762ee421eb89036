import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def gauss1():
    from rwmlab.samplers import Target

    return Target(lambda x: -0.5 * float(x[0] * x[0]), 1)


@pytest.fixture(scope="session")
def d1_small():
    """Short D1-like dataset and its posterior."""
    from rwmlab.datasets import get_dataset
    from rwmlab.mmpp import MmppPosterior, PriorSpec

    spec = get_dataset("D1")
    data = spec.simulate(11)
    return spec, data, MmppPosterior(data, PriorSpec(spec.truth()))


def corr_gauss(rho=0.9, scales=(1.0, 2.0)):
    s = np.array(scales, dtype=float)
    cov = np.array([[1.0, rho], [rho, 1.0]]) * np.outer(s, s)
    prec = np.linalg.inv(cov)
    return cov, (lambda x: -0.5 * float(x @ prec @ x))
