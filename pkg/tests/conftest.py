import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from selfsup_labels.market_data import PriceSeries  # noqa: E402


def sine_noise_prices(n=500, period=50, amplitude=10.0, noise_ratio=0.5, level=100.0, seed=0):
    """Sine of the given period plus Gaussian noise with sigma = noise_ratio * amplitude."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return level + amplitude * np.sin(2 * np.pi * t / period) + rng.normal(0, noise_ratio * amplitude, n)


@pytest.fixture(scope="session")
def fixture_series():
    """The standard synthetic fixture: period-50 sine, noise sigma = 0.5 * amplitude, n = 500."""
    return PriceSeries.from_values(sine_noise_prices(), start="2017-01-03")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_walk(rng, n, level=100.0, vol=0.01):
    return level * np.exp(np.cumsum(rng.normal(0, vol, n)))


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
