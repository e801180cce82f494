import sys
import numpy as np
import pytest

from ptswitch.model import SystemParams

FIG1 = dict(gamma1=2e-4, gamma2=2e-4, gammab=2e-4, dw1=1e-3, dw2=5e-3, wb=4e-3,
            g=1e-4, omega_drive=1.5e-2, nbar=100.0)


def fig1_params(**overrides) -> SystemParams:
    return SystemParams(**{**FIG1, **overrides})


def random_params(rng: np.random.Generator, **overrides) -> SystemParams:
    """Symmetric-rate draw on the scale of the fig1.cfg parameters."""
    gamma = rng.uniform(0.5e-4, 5e-4)
    kw = dict(
        gamma1=rng.uniform(0.5e-4, 5e-4),
        gamma2=gamma,
        gammab=gamma,
        dw1=rng.uniform(-3e-3, 3e-3),
        dw2=rng.uniform(-8e-3, 8e-3),
        wb=rng.uniform(1e-3, 8e-3),
        g=rng.uniform(0.3e-4, 3e-4),
        omega_drive=rng.uniform(0.0, 0.1),
        nbar=0.0,
    )
    kw.update(overrides)
    return SystemParams(**kw)


@pytest.fixture
def fig1():
    return fig1_params()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
