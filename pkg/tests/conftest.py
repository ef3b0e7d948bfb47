import math

import numpy as np
import pytest

from bergmanlab import domains as dom
from bergmanlab.geometry import GeodesicField
from bergmanlab.kernels import engine_for

RHO = math.tanh(1.0 / math.sqrt(2.0))  # Euclidean radius of B(0,1) on disc
DISC_BALL_MASS = math.pi * RHO ** 2


@pytest.fixture(scope="session")
def disc_domain():
    return dom.disc()


@pytest.fixture(scope="session")
def bidisc_domain():
    return dom.polydisc(2)


@pytest.fixture(scope="session")
def ball2_domain():
    return dom.ball(2)


@pytest.fixture(scope="session")
def disc_grid(disc_domain):
    return dom.build_grid(disc_domain, 0.025)


@pytest.fixture(scope="session")
def disc_grid_fine(disc_domain):
    return dom.build_grid(disc_domain, 0.0125)


@pytest.fixture(scope="session")
def bidisc_grid(bidisc_domain):
    return dom.build_grid(bidisc_domain, 0.08)


@pytest.fixture(scope="session")
def ball2_grid(ball2_domain):
    return dom.build_grid(ball2_domain, 0.1)


@pytest.fixture(scope="session")
def disc_engine(disc_domain):
    return engine_for(disc_domain)


@pytest.fixture(scope="session")
def bidisc_engine(bidisc_domain):
    return engine_for(bidisc_domain)


@pytest.fixture(scope="session")
def ball2_engine(ball2_domain):
    return engine_for(ball2_domain)


@pytest.fixture(scope="session")
def disc_field(disc_engine, disc_grid):
    return GeodesicField(disc_engine, disc_grid)


@pytest.fixture(scope="session")
def disc_field_fine(disc_engine, disc_grid_fine):
    return GeodesicField(disc_engine, disc_grid_fine)


@pytest.fixture(scope="session")
def disc_field_dense(disc_engine, disc_grid_fine):
    """Denser geodesic graph: metrication error small enough for
    quantitative ball-integral oracles."""
    return GeodesicField(disc_engine, disc_grid_fine, neighbors_per_dim=32)


@pytest.fixture(scope="session")
def bidisc_field(bidisc_engine, bidisc_grid):
    return GeodesicField(bidisc_engine, bidisc_grid)


@pytest.fixture(scope="session")
def ball2_field(ball2_engine, ball2_grid):
    return GeodesicField(ball2_engine, ball2_grid)


def zbar1(dim):
    from bergmanlab.operators import SymbolFn

    def db(z):
        out = np.zeros((len(z), dim), dtype=complex)
        out[:, 0] = 1.0
        return out
    return SymbolFn(fn=lambda z: np.conj(np.atleast_2d(z)[:, 0]),
                    smoothness="C1", dbar=db, label="conj(z1)")
