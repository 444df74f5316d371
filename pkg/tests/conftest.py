import numpy as np
import pytest

from eacal.geometry import FrameSpec, Point2, synthetic_circle_anchors
from eacal.waveform import PulseSpec

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(key, passed, detail=""):
        ACCEPTANCE[key] = (bool(passed), detail)

    return _record


@pytest.fixture(scope="session")
def small_spec():
    return PulseSpec(n_samples=256)


@pytest.fixture(scope="session")
def origin_frame():
    return FrameSpec(Point2(0.0, 0.0), 0.0)


@pytest.fixture(scope="session")
def anchors32(origin_frame):
    return synthetic_circle_anchors(origin_frame, 2.5, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def planted_runs():
    from planted import planted_run

    return [planted_run(seed) for seed in range(20)]
