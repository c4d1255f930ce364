import pytest

from physguard.model import TankParams, build_tank_model
from physguard.noise import NoiseSpec
from physguard.sim import ControllerConfig

_ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""
    def _record(name, ok, detail=""):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}  {detail}".rstrip())
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def dyadic_tank():
    """Tank whose flows, setpoints and levels are exact binary fractions."""
    params = TankParams(area=1.0, q_in=1 / 256, q_out=1 / 512, level_min=0.0,
                        level_max=1.0, sample_period=1.0)
    return params, build_tank_model(params), ControllerConfig(0.25, 0.75)


@pytest.fixture
def quiet():
    return NoiseSpec()
