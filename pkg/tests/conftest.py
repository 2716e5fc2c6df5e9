import numpy as np
import pytest

from cavity_nls import CavityConfig, PulseSpec, build_two_level
from cavity_nls.dynamics import TimeGrid


@pytest.fixture
def tls():
    return build_two_level(100.0, gamma=0.2, gamma_phi=0.1)


@pytest.fixture
def cavity():
    return CavityConfig.from_collective_coupling(100.0, 3.0)


@pytest.fixture
def pump():
    return PulseSpec(eta=1.0, omega=100.0, tau=2.0, tau_w=0.1)


@pytest.fixture
def probe(pump):
    return pump.with_(tau=3.0)


@pytest.fixture
def short_grid():
    return TimeGrid(0.0, 20.0, 2001)



def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for the acceptance summary."""
    def record(label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
