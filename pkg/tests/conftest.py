import numpy as np
import pytest

from orthoglide.design import size_joint_limits
from orthoglide.model import canonical_orthoglide
from orthoglide.workspace import PointPredicate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def canon():
    return canonical_orthoglide(1.0)


@pytest.fixture(scope="session")
def design_result():
    return size_joint_limits(canonical_orthoglide(1.0), (1.0 / 3.0, 3.0), 21)


@pytest.fixture(scope="session")
def designed(design_result):
    return design_result.apply(canonical_orthoglide(1.0))


@pytest.fixture(scope="session")
def workspace_points(designed):
    """1000 feasible platform points of the sized canonical machine."""
    pred = PointPredicate(designed)
    rng = np.random.default_rng(7)
    cand = rng.uniform(-0.75, 0.75, size=(20000, 3))
    pts = cand[pred(cand)]
    assert len(pts) >= 1000
    return pts[:1000]


@pytest.fixture
def record():
    def _record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
