import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.curvature import (
    curvature_H,
    curvature_L_theta,
    hodge_riemann_check,
    lefschetz_decompose,
    lefschetz_reconstruct,
    lift_independence_check,
    second_fundamental_form,
    wedge_pair,
    xu_wang_bound,
)
from toruslab.errors import CurvatureNotInvertible, NotPrimitive
from toruslab.family import (
    berndtsson_representative,
    kappa,
    perturb_lift,
    primitive_lift,
    trivialization_lift,
)
from toruslab.forms import Grid, Spectral, lefschetz_L, make_space, pair_l2
from toruslab.geometry import elliptic_family, siegel_diagonal_family
from toruslab.hodge import build_hodge
from toruslab.oracle import fd_chern_curvature_H

from conftest import T0, band_limited, band_limited_field

ADM = 1e-2  # admissibility gate for the coarse N=32 grids used here


@pytest.fixture(scope="module")
def grid_curv():
    """Full curvature pipeline on the degree-1 family at N=32 (seconds)."""
    fam = elliptic_family(T0, d=1)
    torus, bundle = fam.torus_at(), fam.bundle_at()
    disc = Grid(N=32, order=6)
    sp = make_space(torus, bundle, (1, 0), disc)
    pkg0 = build_hodge(sp, expected_kernel=1)
    basis = [f * (1.0 / f.norm()) for f in pkg0.harmonic_basis]
    lift = trivialization_lift(fam, sp)
    report = curvature_H(fam, lift, basis, pkg0, admissibility_tol=ADM)
    return fam, disc, sp, pkg0, basis, lift, report


def test_wedge_pair_sign_pins(flat_torus, positive_bundle, grid_disc, rng):
    sp10 = make_space(flat_torus, positive_bundle, (1, 0), grid_disc)
    sp01 = make_space(flat_torus, positive_bundle, (0, 1), grid_disc)
    u, v = band_limited(sp10, rng), band_limited(sp10, rng)
    assert abs(wedge_pair(u, v) - pair_l2(u, v)) <= 1e-10
    a = sp01.section(u.coeffs.copy())
    b = sp01.section(v.coeffs.copy())
    assert abs(wedge_pair(a, b) + pair_l2(a, b)) <= 1e-10


def test_hodge_riemann_signs(flat_torus, positive_bundle, grid_disc, rng):
    sp10 = make_space(flat_torus, positive_bundle, (1, 0), grid_disc)
    u = band_limited(sp10, rng)
    lhs, rhs, res = hodge_riemann_check(u)
    assert res <= 1e-8
    assert rhs.real > 0
    sp01 = make_space(flat_torus, positive_bundle, (0, 1), grid_disc)
    a = band_limited(sp01, rng)
    lhs, rhs, res = hodge_riemann_check(a)
    assert res <= 1e-8
    assert rhs.real < 0


def test_hodge_riemann_rejects_kaehler_form(torus2, flat_bundle2, spec_disc):
    sp11 = make_space(torus2, flat_bundle2, (1, 1), spec_disc)
    om = sp11.zeros()
    g = torus2.kaehler
    zi = sp11.calculus.zero_mode_index()
    for ci, (J, K) in enumerate(sp11.comps):
        om.coeffs[(ci,) + zi] = 0.5j * g[J[0], K[0]]
    with pytest.raises(NotPrimitive):
        hodge_riemann_check(om)


def test_lefschetz_decomposition_roundtrip(torus2, flat_bundle2, spec_disc, rng):
    sp11 = make_space(torus2, flat_bundle2, (1, 1), spec_disc)
    alpha = band_limited(sp11, rng)
    parts = lefschetz_decompose(alpha)
    rec = lefschetz_reconstruct(sp11, parts)
    assert (rec - alpha).norm() <= 1e-10 * max(alpha.norm(), 1.0)
    for j, part in parts:
        if j == 0 and part.space.bidegree == (1, 1):
            lhs, rhs, res = hodge_riemann_check(part)
            assert res <= 1e-8
            assert rhs.real < 0  # primitive (1,1) sign


def test_flat_family_curvature_closed_form():
    fam = elliptic_family(0.2 + 0.8j, d=0, chi=(0.0, 0.0))
    s = fam.t.imag
    torus, bundle = fam.torus_at(), fam.bundle_at()
    sp = make_space(torus, bundle, (1, 0), Spectral(M=6))
    pkg = build_hodge(sp, expected_kernel=1)
    basis = [f * (1.0 / f.norm()) for f in pkg.harmonic_basis]
    lift = trivialization_lift(fam, sp)
    report = curvature_H(fam, lift, basis, pkg)
    expect = 1.0 / (4.0 * s * s)
    assert report.theta_H[0, 0].real == pytest.approx(expect, rel=1e-12)
    assert report.residual_routes <= 1e-12
    assert abs(curvature_L_theta(lift, basis[0], basis[0]) - expect) <= 1e-12
    with pytest.raises(CurvatureNotInvertible):
        xu_wang_bound(fam, lift, basis, pkg)


def test_route_agreement_and_positivity(grid_curv):
    fam, disc, sp, pkg0, basis, lift, report = grid_curv
    scale = max(np.linalg.norm(report.theta_H), 1e-300)
    assert report.residual_routes / scale <= 1e-4
    assert report.nakano_min_eig >= -1e-8
    assert np.linalg.eigvalsh(report.term_sff).min() >= -1e-12
    assert report.hermiticity_defect() <= 1e-10


def test_fd_oracle_agreement(grid_curv):
    fam, disc, sp, pkg0, basis, lift, report = grid_curv
    M = fd_chern_curvature_H(fam, 1, disc, step=1e-3, harmonic_basis=basis)
    rel = np.linalg.norm(report.theta_H - M) / np.linalg.norm(M)
    assert rel <= 1e-3


def test_second_fundamental_form_routes(grid_curv):
    fam, disc, sp, pkg0, basis, lift, report = grid_curv
    sp11 = make_space(fam.torus_at(), fam.bundle_at(), (1, 1), disc)
    pkg11 = build_hodge(sp11, expected_kernel=0)
    rep = berndtsson_representative(fam, lift, basis[0], pkg0, tol=ADM)
    ii_proj = second_fundamental_form(lift, rep, pkg_n0=pkg0,
                                      route="projection", admissibility_tol=ADM)
    ii_green = second_fundamental_form(lift, rep, pkg_n1=pkg11,
                                       route="green", admissibility_tol=ADM)
    rel = (ii_proj - ii_green).norm() / max(ii_proj.norm(), 1e-300)
    assert rel <= 1e-4  # coarse grid; the fine-grid bound lives in the acceptance suite


def test_lift_independence(grid_curv, rng):
    fam, disc, sp, pkg0, basis, lift, report = grid_curv
    W = band_limited_field(sp.calculus, rng, (1,) + sp.field_shape, magnitude=0.1)
    lift2 = perturb_lift(lift, W)
    rel = lift_independence_check(fam, basis, lift, lift2, pkg0,
                                  admissibility_tol=ADM)
    assert rel <= 1e-3  # coarse grid; the fine-grid bound lives in the acceptance suite


def test_xu_wang_lower_bound(grid_curv):
    fam, disc, sp, pkg0, basis, lift, report = grid_curv
    lhs, rhs = xu_wang_bound(fam, lift, basis, pkg0, report=report)
    assert np.linalg.eigvalsh(lhs - rhs).min() >= -1e-8


def test_abelian_surface_pairing_identity():
    fam = siegel_diagonal_family(0.2 + 0.9j)
    torus, bundle = fam.torus_at(), fam.bundle_at()
    sp = make_space(torus, bundle, (2, 0), Spectral(M=4))
    pkg = build_hodge(sp, expected_kernel=1)
    f = pkg.harmonic_basis[0]
    f = f * (1.0 / f.norm())
    lift = trivialization_lift(fam, sp)
    kf = kappa(lift, f)
    assert abs(wedge_pair(kf, kf) + pair_l2(kf, kf)) <= 1e-10
    # primitivity of kappa f, expressed through the Lefschetz operator
    assert lefschetz_L(kf.space).apply(kf).norm() <= 1e-10


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 100))
def test_hodge_riemann_epsilon_is_unit_modulus(seed, torus2, flat_bundle2, spec_disc):
    rng = np.random.default_rng(seed)
    sp20 = make_space(torus2, flat_bundle2, (2, 0), spec_disc)
    u = band_limited(sp20, rng)
    lhs, rhs, res = hodge_riemann_check(u)
    assert res <= 1e-8
    # (2,0)-forms on a surface pair with a positive sign
    assert rhs.real > 0
