import numpy as np
import pytest

from lmbfusion.core import BernoulliComponent, Label, LmbDensity, ParticleSet

_acceptance_results = []
ACCEPTANCE_NOTES = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in _acceptance_results:
            note = ACCEPTANCE_NOTES.get(name)
            suffix = f" — {note}" if note else ""
            terminalreporter.write_line(f"{name}: {outcome}{suffix}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def point_mass(px, py, vx=0.0, vy=0.0, omega=0.0, n=1):
    """Particle set with all mass at a single kinematic state."""
    states = np.tile([[px, vx, py, vy, omega]], (n, 1))
    return ParticleSet.uniform(states)


def component(label, existence, px, py, n=1, **kin):
    return BernoulliComponent(Label(*label), existence, point_mass(px, py, n=n, **kin))


def density(comps, time=0, owner=1):
    return LmbDensity(tuple(comps), time=time, owner=owner)
