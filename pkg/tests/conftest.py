import numpy as np
import pytest

from toruslab.forms import Grid, Spectral, make_space
from toruslab.geometry import make_torus, make_flat_bundle, make_positive_bundle

T0 = 0.3 + 1.1j


def band_limited(space, rng, nmodes=6, kmax=2):
    """A smooth random section: a handful of low Fourier modes.

    Grid stencil operators only satisfy composite identities on resolved
    fields, so rough (white-noise) inputs are reserved for tests that target
    exactly that failure mode.
    """
    coeffs = np.zeros((space.ncomp,) + space.field_shape, dtype=complex)
    if isinstance(space.disc, Spectral):
        coeffs = rng.standard_normal(coeffs.shape) + 1j * rng.standard_normal(coeffs.shape)
    else:
        calc = space.calculus
        for ci in range(space.ncomp):
            for _ in range(nmodes):
                kx, ky = rng.integers(-kmax, kmax + 1, size=2)
                c = rng.standard_normal() + 1j * rng.standard_normal()
                coeffs[ci] += c * np.exp(2j * np.pi * (kx * calc.x + ky * calc.y))
    u = space.section(coeffs)
    nu = u.norm()
    return u * (1.0 / nu) if nu > 0 else u


def band_limited_field(calc, rng, shape, magnitude=0.1):
    """A smooth random vertical field with sup-norm `magnitude`."""
    W = np.zeros(shape, dtype=complex)
    for (kx, ky) in [(0, 0), (1, 0), (0, 1), (-1, 1), (2, -1)]:
        c = rng.standard_normal() + 1j * rng.standard_normal()
        W[0] += c * np.exp(2j * np.pi * (kx * calc.x + ky * calc.y))
    W *= magnitude / max(np.abs(W).max(), 1e-300)
    return W


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def flat_torus():
    return make_torus(1, [[T0]])


@pytest.fixture(scope="session")
def flat_bundle(flat_torus):
    return make_flat_bundle(flat_torus, [0.0, 0.0])


@pytest.fixture(scope="session")
def spec_disc():
    return Spectral(M=6)


@pytest.fixture(scope="session")
def grid_disc():
    return Grid(N=32, order=6)


@pytest.fixture(scope="session")
def positive_bundle(flat_torus):
    return make_positive_bundle(flat_torus, 1)


@pytest.fixture(scope="session")
def torus2():
    return make_torus(2, [[T0, 0.0], [0.0, 2.0 * T0]])


@pytest.fixture(scope="session")
def flat_bundle2(torus2):
    return make_flat_bundle(torus2, [0.0, 0.0, 0.0, 0.0])
