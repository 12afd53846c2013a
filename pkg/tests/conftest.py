from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fsprivacy import canonicalize, thresholds

FIXTURES = Path(__file__).parent / "fixtures"
Q_EX = (0.130, 0.440, 0.430)
P_EX = (0.380, 0.390, 0.230)

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_pmf(rng, n, floor=0.01):
    """Dirichlet(1) draw shifted so every component is at least ``floor``."""
    return floor + (1.0 - floor * n) * rng.dirichlet(np.ones(n))


def random_instance(rng, n, rho_scale=1.5):
    """A canonical view plus rates with rho in [0, 1.5 rho_n] and sigma in [0, sigma_1)."""
    view = canonicalize(random_pmf(rng, n), random_pmf(rng, n))
    table = thresholds(view)
    rho = rng.uniform(0, rho_scale * table.rho_n)
    sigma = rng.uniform(0, table.sigma_1)
    return view, rho, sigma


@pytest.fixture
def example_view():
    return canonicalize(Q_EX, P_EX)


@st.composite
def pmf_pairs(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    w = st.lists(st.integers(1, 100), min_size=n, max_size=n)
    q = np.array(draw(w), dtype=float)
    p = np.array(draw(w), dtype=float)
    return q / q.sum(), p / p.sum()


@st.composite
def instances(draw, min_n=2, max_n=8):
    """(view, rho, sigma) with rates spread over both regions."""
    q, p = draw(pmf_pairs(min_n, max_n))
    view = canonicalize(q, p)
    table = thresholds(view)
    a = draw(st.floats(0, 1.5))
    b = draw(st.floats(0, 1, exclude_max=True))
    return view, a * max(table.rho_n, 1e-3), b * table.sigma_1
