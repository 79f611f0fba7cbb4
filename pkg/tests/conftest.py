import numpy as np
import pytest

from irs_ee.channel_gen import ChannelParams, generate_realization, trial_rng
from irs_ee.core_model import ChannelSet, SystemConfig


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_unit(rng, n):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def scenario(seed, K=3, M=4, N=4, pmax_dbm=20.0, **kw):
    """Config plus one seeded realization of the default channel model."""
    config = SystemConfig.uniform(K, M, N, pmax_dbm=pmax_dbm, **kw)
    rng = trial_rng(seed, 0)
    return config, generate_realization(config, ChannelParams(), rng), rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_channels(rng):
    config = SystemConfig.uniform(2, 2, 2)
    return config, ChannelSet(G=crandn(rng, 2, 2), h=crandn(rng, 2, 2))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
