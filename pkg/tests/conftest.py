import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sample_points(rng, n, x=(-1.0, 1.0), y=(0.5, 2.0)):
    """Random (x, y, phi) rows in the sampling window."""
    return np.column_stack([rng.uniform(*x, n), rng.uniform(*y, n), rng.uniform(0, 2 * np.pi, n)])


CRITERIA_LINES = []


def record_criterion(number, label, ok, detail=""):
    line = f"criterion {number} ({label}): {'PASS' if ok else 'FAIL'}" + (f" {detail}" if detail else "")
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
