import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.errors import NotCoexact
from toruslab.forms import (
    Grid,
    Spectral,
    assemble_dbar,
    make_space,
    pair_l2,
)
from toruslab.geometry import make_flat_bundle, make_positive_bundle, make_torus
from toruslab.hodge import (
    bergman_project,
    build_hodge,
    minimal_solution,
    neumann_project,
    smallest_positive_eigenvalue,
)
from toruslab.oracle import exact_flat_spectrum

from conftest import T0, band_limited


@pytest.fixture(scope="module")
def flat01():
    torus = make_torus(1, [[T0]])
    bundle = make_flat_bundle(torus, [0.0, 0.0])
    sp = make_space(torus, bundle, (0, 1), Spectral(M=6))
    return build_hodge(sp, expected_kernel=1)


@pytest.fixture(scope="module")
def flat11():
    torus = make_torus(1, [[T0]])
    bundle = make_flat_bundle(torus, [0.0, 0.0])
    sp = make_space(torus, bundle, (1, 1), Spectral(M=6))
    return build_hodge(sp, expected_kernel=1)


@pytest.fixture(scope="module")
def grid11():
    torus = make_torus(1, [[T0]])
    bundle = make_positive_bundle(torus, 1)
    sp = make_space(torus, bundle, (1, 1), Grid(N=32, order=6))
    return build_hodge(sp, expected_kernel=0)


def test_flat_spectrum_matches_closed_form(flat01):
    torus = flat01.space.torus
    lam_exact = exact_flat_spectrum(torus, [0.0, 0.0], (0, 1), M=6)
    lam = np.sort(flat01.eigenvalues())
    m = min(len(lam), len(lam_exact))
    assert np.allclose(lam[:m], lam_exact[:m], atol=1e-10)


def test_flat_kernel_dims_match_character():
    torus = make_torus(1, [[T0]])
    for chi, dim in [((0.0, 0.0), 1), ((0.5, 0.0), 0), ((0.0, 0.5), 0)]:
        bundle = make_flat_bundle(torus, chi)
        sp = make_space(torus, bundle, (1, 0), Spectral(M=4))
        pkg = build_hodge(sp, expected_kernel=dim)
        assert pkg.harmonic_dim == dim


def test_positive_bundle_kernel_dim_is_degree():
    torus = make_torus(1, [[T0]])
    for d in (1, 2):
        bundle = make_positive_bundle(torus, d)
        sp = make_space(torus, bundle, (1, 0), Grid(N=32, order=6))
        pkg = build_hodge(sp, expected_kernel=d)
        assert pkg.harmonic_dim == d


@pytest.mark.parametrize("which", ["flat01", "grid11"])
def test_decomposition_identity(which, flat01, grid11, rng):
    pkg = {"flat01": flat01, "grid11": grid11}[which]
    u = band_limited(pkg.space, rng)
    resid = u - pkg.harmonic_project(u) - pkg.laplacian.apply(pkg.green(u))
    assert resid.norm() <= 1e-9


def test_projection_is_idempotent_and_orthogonal(flat01, rng):
    u = band_limited(flat01.space, rng)
    hu = flat01.harmonic_project(u)
    assert (flat01.harmonic_project(hu) - hu).norm() <= 1e-10
    assert abs(pair_l2(u - hu, hu)) <= 1e-10


def test_minimal_solution_norm_identity(flat11, rng):
    sp10 = flat11.space.sibling((1, 0))
    v = band_limited(sp10, rng)
    alpha = assemble_dbar(sp10).apply(v)
    u0 = minimal_solution(flat11, alpha)
    lhs = u0.norm() ** 2
    rhs = pair_l2(flat11.green(alpha), alpha).real
    assert abs(lhs - rhs) <= 1e-8 * max(abs(rhs), 1e-30)
    assert (assemble_dbar(sp10).apply(u0) - alpha).norm() <= 1e-9


def test_minimal_solution_rejects_harmonic_rhs(flat11):
    h = flat11.harmonic_basis[0]
    with pytest.raises(NotCoexact):
        minimal_solution(flat11, h)


def test_bergman_neumann_split(flat11, rng):
    sp10 = flat11.space.sibling((1, 0))
    f = band_limited(sp10, rng)
    bf = bergman_project(flat11, f)
    nf = neumann_project(flat11, f)
    assert (bf + nf - f).norm() <= 1e-10
    assert assemble_dbar(sp10).apply(bf).norm() <= 1e-8
    assert (bergman_project(flat11, bf) - bf).norm() <= 1e-8


def test_lambda1_matches_oracle(flat01):
    torus = flat01.space.torus
    lam_exact = exact_flat_spectrum(torus, [0.0, 0.0], (0, 1), M=6)
    lam1 = lam_exact[lam_exact > 1e-9].min()
    assert smallest_positive_eigenvalue(flat01) == pytest.approx(lam1, rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1_000))
def test_green_is_selfadjoint_and_positive(seed, flat01):
    rng = np.random.default_rng(seed)
    u = band_limited(flat01.space, rng)
    v = band_limited(flat01.space, rng)
    gu, gv = flat01.green(u), flat01.green(v)
    assert abs(pair_l2(gu, v) - pair_l2(u, gv)) <= 1e-10
    quad = pair_l2(flat01.green(u - flat01.harmonic_project(u)),
                   u - flat01.harmonic_project(u)).real
    assert quad >= -1e-12
