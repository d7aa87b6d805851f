import os
import sys
import warnings

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from riskbif import REFERENCE_PARAMS, ModelParams  # noqa: E402

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")


@pytest.fixture
def base():
    return ModelParams(**REFERENCE_PARAMS)


@pytest.fixture
def tbt(base):
    from riskbif import locate_tbt_point

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return locate_tbt_point(base)[0]


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
