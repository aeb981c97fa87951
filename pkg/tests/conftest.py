import numpy as np
import pytest

from nmchannel.config import ExperimentConfig


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig.default()


@pytest.fixture(scope="session")
def geometry(cfg):
    return cfg.geometry()


@pytest.fixture(scope="session")
def spectrum(cfg):
    return cfg.spectrum()


@pytest.fixture(scope="session")
def mask(cfg):
    return cfg.mask(True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
