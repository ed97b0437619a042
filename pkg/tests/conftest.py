import numpy as np
import pytest
from hypothesis import settings

from isotm import geom_core as gc

settings.register_profile("isotm", max_examples=25, deadline=None)
settings.load_profile("isotm")


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


@pytest.fixture(scope="session")
def s2():
    return gc.sphere_stereographic(2)


@pytest.fixture(scope="session")
def s3():
    return gc.sphere_stereographic(3)


@pytest.fixture(scope="session")
def e2():
    return gc.euclidean(2)


def wavy_field(rng, n):
    """Non-polynomial test field with an analytic jacobian."""
    c = rng.normal(size=n)
    A = rng.normal(size=(n, n)) * 0.5
    s = rng.normal(size=n) * 0.3

    def value(x):
        return c + np.einsum("ij,...j->...i", A, x) + s * np.sin(x)

    def jac(x):
        return A + s[:, None] * np.eye(n) * np.cos(x)[..., None, :]

    return gc.VectorFieldOnM(value, jac, "wavy")


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def report(number, ok, message):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {message}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
