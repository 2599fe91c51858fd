import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.errors import ExtensionNotAdmissible
from toruslab.family import (
    berndtsson_representative,
    class_match_residual,
    kappa,
    ks_representative,
    make_extension,
    perturb_lift,
    primitive_lift,
    primitivity_residual,
    trivialization_lift,
)
from toruslab.forms import Grid, Spectral, make_space
from toruslab.geometry import elliptic_family, siegel_diagonal_family
from toruslab.hodge import build_hodge

from conftest import T0, band_limited, band_limited_field


@pytest.fixture(scope="module")
def grid_setup():
    fam = elliptic_family(T0, d=1)
    torus, bundle = fam.torus_at(), fam.bundle_at()
    disc = Grid(N=32, order=6)
    sp = make_space(torus, bundle, (1, 0), disc)
    pkg0 = build_hodge(sp, expected_kernel=1)
    f = pkg0.harmonic_basis[0]
    f = f * (1.0 / f.norm())
    lift = trivialization_lift(fam, sp)
    return fam, sp, pkg0, f, lift


def test_trivialization_ks_field_is_constant(grid_setup):
    fam, sp, pkg0, f, lift = grid_setup
    ks = ks_representative(lift)
    # Omega(t) = t: the lift has dbar-xi = -tau/(t - tbar) dzbar (x) d/dz
    expect = -1.0 / (T0 - np.conj(T0))
    assert np.allclose(ks[0, 0], expect)


def test_kappa_is_linear(grid_setup, rng):
    fam, sp, pkg0, f, lift = grid_setup
    g = band_limited(sp, rng)
    lhs = kappa(lift, f * 2.0 + g)
    rhs = kappa(lift, f) * 2.0 + kappa(lift, g)
    assert (lhs - rhs).norm() <= 1e-12


def test_perturbation_roundtrip(grid_setup, rng):
    fam, sp, pkg0, f, lift = grid_setup
    W = band_limited_field(sp.calculus, rng, (1,) + sp.field_shape)
    up = perturb_lift(lift, W)
    back = perturb_lift(up, -W)
    assert np.allclose(back.ks_field(), lift.ks_field(), atol=1e-12)
    assert up.kind == "perturbed"


def test_primitive_lift_is_identity_in_dimension_one(grid_setup):
    fam, sp, pkg0, f, lift = grid_setup
    out = primitive_lift(fam, lift)
    assert np.allclose(out.ks_field(), lift.ks_field())
    assert primitivity_residual(out, f) == 0.0


def test_primitive_lift_corrects_perturbed_surface_lift(rng):
    fam = siegel_diagonal_family(0.2 + 0.9j)
    torus, bundle = fam.torus_at(), fam.bundle_at()
    disc = Spectral(M=5)
    sp = make_space(torus, bundle, (2, 0), disc)
    pkg0 = build_hodge(sp, expected_kernel=1)
    f = pkg0.harmonic_basis[0]
    f = f * (1.0 / f.norm())
    base = trivialization_lift(fam, sp)

    # a vertical perturbation with off-diagonal shear makes kappa non-primitive
    W = np.zeros((2,) + sp.field_shape, dtype=complex)
    W[0] = 0.05 * rng.standard_normal(sp.field_shape)
    W[1] = 0.05 * rng.standard_normal(sp.field_shape)
    pert = perturb_lift(base, W)
    res_pert = primitivity_residual(pert, f)
    assert res_pert > 1e-6

    sp02 = make_space(torus, bundle, (0, 2), disc)
    pkg02 = build_hodge(sp02, expected_kernel=1)
    fixed = primitive_lift(fam, pert, pkg02)
    assert primitivity_residual(fixed, f) <= 1e-8


def test_extension_admissibility_gate(grid_setup, rng):
    fam, sp, pkg0, f, lift = grid_setup
    ext = make_extension(fam, f, admissibility_tol=1e-2)
    assert ext is not None
    # the gate exists to reject corrupted data: a harmonic section polluted
    # with white noise has unresolved stencil derivatives
    rough = f + band_limited(sp, rng) * 0.0
    noise = sp.section(0.05 * (rng.standard_normal((1,) + sp.field_shape)
                               + 1j * rng.standard_normal((1,) + sp.field_shape)))
    with pytest.raises(ExtensionNotAdmissible):
        make_extension(fam, f + noise, admissibility_tol=1e-4)


def test_representative_properties_coarse(grid_setup):
    fam, sp, pkg0, f, lift = grid_setup
    rep = berndtsson_representative(fam, lift, f, pkg0, tol=1e-2)
    assert rep.primitive_ok
    assert rep.orthogonality_ok
    sp01 = sp.sibling((0, 1))
    pkg01 = build_hodge(sp01, expected_kernel=0)
    assert class_match_residual(rep, pkg01) <= 1e-3


def test_representative_scales_with_section(grid_setup):
    fam, sp, pkg0, f, lift = grid_setup
    rep1 = berndtsson_representative(fam, lift, f, pkg0, tol=1e-2)
    rep2 = berndtsson_representative(fam, lift, f * 2.0, pkg0, tol=1e-2)
    assert (rep2.xi_dbar_u() - rep1.xi_dbar_u() * 2.0).norm() <= 1e-8


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(0.2, 2.0))
def test_ks_class_independent_of_vertical_perturbation(scale, grid_setup):
    # the Kodaira-Spencer class only changes by a dbar-exact term
    fam, sp, pkg0, f, lift = grid_setup
    rng = np.random.default_rng(int(scale * 1000))
    W = band_limited_field(sp.calculus, rng, (1,) + sp.field_shape,
                           magnitude=0.1 * scale)
    up = perturb_lift(lift, W)
    sp01 = sp.sibling((0, 1))
    pkg01 = build_hodge(sp01, expected_kernel=0)
    diff = kappa(up, f) - kappa(lift, f)
    assert pkg01.harmonic_project(diff).norm() <= 1e-6 * max(f.norm(), 1.0)
