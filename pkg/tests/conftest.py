import numpy as np
import pytest

from warpcone.actions import rotation_action
from warpcone.spaces import torus_grid


@pytest.fixture
def circle8():
    return torus_grid(8)


@pytest.fixture
def quarter_turn(circle8):
    return rotation_action(circle8, ["1/4"], moduli=[4])


def assert_metric(d, tol=1e-12):
    assert np.allclose(np.diag(d), 0)
    assert np.array_equal(d, d.T)
    # triangle inequality over every triple
    assert (d[:, None, :] <= d[:, :, None] + d[None, :, :] + tol).all()


CRITERIA: dict = {}


@pytest.fixture
def criterion():
    def record(key: str, ok: bool, detail: str):
        CRITERIA[key] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int("".join(c for c in k.split()[0] if c.isdigit())), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
