import numpy as np
import pytest

from ssmgic.core import FilterInit
from ssmgic.models import SeasonalArConfig, SeasonalConfig, TrendConfig, simulate

FAMILIES = {
    "trend1": TrendConfig(1),
    "trend2": TrendConfig(2),
    "seasonal12": SeasonalConfig(2, 12),
    "seasonal_ar1": SeasonalArConfig(2, 12, 1),
    "seasonal_ar2": SeasonalArConfig(2, 12, 2),
}

SMALL_FAMILIES = {
    "trend1": TrendConfig(1),
    "trend2": TrendConfig(2),
    "seasonal4": SeasonalConfig(2, 4),
    "seasonal_ar1": SeasonalArConfig(2, 4, 1),
    "seasonal_ar2": SeasonalArConfig(1, 4, 2),
}


def pacf_to_ar(pacf):
    """Durbin-Levinson map from partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    a = np.zeros(0)
    for k, phi in enumerate(pacf):
        a = np.r_[a - phi * a[::-1], phi] if k else np.array([phi])
    return a


def random_theta(model, rng):
    """A well-conditioned working-scale draw for ``model``."""
    mask = np.asarray(model.log_variance)
    theta = np.empty(mask.size)
    theta[mask] = rng.uniform(-4.0, 0.0, mask.sum())
    n_ar = int((~mask).sum())
    if n_ar:
        pacf = rng.uniform(0.2, 0.85, n_ar) * rng.choice([-1.0, 1.0], n_ar)
        theta[~mask] = pacf_to_ar(pacf)
    return theta


def quiet_init(m):
    return FilterInit(x0=np.zeros(m), V0=np.zeros((m, m)))


def simulated_case(model, seed, N):
    rng = np.random.default_rng(seed)
    theta = random_theta(model, rng)
    spec = model.build(theta)
    y = simulate(spec, quiet_init(spec.m), N, seed)
    return theta, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
