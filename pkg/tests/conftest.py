import math

import numpy as np
import pytest

from stadium_limits.geometry import StadiumGeometry
from stadium_limits.sampling import SeedSpec


@pytest.fixture(scope="session")
def geom():
    return StadiumGeometry(2.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260811)


def mu0_points(geom, n, seed=0):
    """Plain mu0 sample arrays for tests."""
    g = SeedSpec(seed, 77).generator()
    r = g.uniform(0, geom.perimeter, n)
    th = np.arcsin(2 * g.uniform(size=n) - 1)
    return r, th


def wrap_dist(a, b, period):
    d = (a - b) % period
    return min(d, period - d)
