"""t-direction calculus on the universal torus trivialization.

Horizontal lifts, Kodaira-Spencer representatives, twisted Lie derivatives,
the primitive-lift construction, and the representative method used by the
curvature computations.

Conventions.  A fiber section f is extended to nearby fibers in the frame
hat-dz_a = dx_a + sum_b Omega_{ab}(t) dy_b (the fiberwise dz-frame written in
universal coordinates).  With u = S(x,y,t) hat-dz_1 ^ ... ^ hat-dz_n + dt ^ v:

* the trivialization lift xi = tau d/dt|_{(x,y)} contracts to zero with the
  hat-frame, so every restricted contraction below is a genuine bundle section;
* the dt-component of dbar u restricted to the fiber is alpha0 = kappa_triv f
  (plus -dbar v), for both the constant extension (flat bundles) and the
  holomorphic theta extension (positive bundles);
* the dt-component of nabla^{1,0} u restricted to the fiber is phi0 - nabla v,
  with phi0 in closed form: tr(Omega' (Omega - bar Omega)^{-1}) f for flat
  constant extensions, and y nabla_z theta + theta/(t - bar t) + heat-flow term
  - i pi d y^2 theta for the degree-d theta extension (the sum is periodic even
  though the individual y-weighted terms are not).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ExtensionNotAdmissible, HodgeUnavailable
from .forms import (
    FormSection,
    FormSpace,
    Grid,
    Spectral,
    adjoint,
    assemble_dbar,
    assemble_nabla10,
    contract,
    contract_ks,
    lefschetz_L,
    lefschetz_Lambda,
    make_space,
    multiply,
    pair_l2,
)
from .geometry import FamilySpec, make_flat_bundle
from .hodge import HodgePackage


# ---------------------------------------------------------------------------
# horizontal lifts


@dataclass
class HorizontalLift:
    """xi = tau * (d/dt|_{(x,y)} + sum_a W_a d/dz_a) with W a periodic vertical field.

    W = 0 is the trivialization lift.  K_triv = -Omega' (Omega - bar Omega)^{-1}
    is the constant Kodaira-Spencer coefficient matrix of the trivialization part;
    K_pert holds dbar W.  The full fiber restriction of dbar xi is
    tau * (K_triv + K_pert)[a,c] dz̄_c ⊗ d/dz_a.
    """

    family: FamilySpec
    t: complex
    tau: complex
    kind: str                      # "trivialization" | "perturbed" | "primitive"
    space: FormSpace               # reference (n,0)-space fixing the discretization
    W: Optional[np.ndarray]        # (n, *field_shape) untwisted samples/modes or None
    K_triv: np.ndarray             # (n, n) constant
    K_pert: Optional[np.ndarray]   # (n, n, *field_shape) or None

    @property
    def n(self) -> int:
        return self.space.n

    def ks_field(self) -> np.ndarray:
        """Full (n, n, *shape) coefficient field of iota* dbar xi (without tau)."""
        shape = (self.n, self.n) + (1,) * len(self.space.field_shape)
        K = self.K_triv.reshape(shape).astype(complex)
        if self.K_pert is not None:
            K = K + self.K_pert
        return K

    def vertical_contract(self, u: FormSection) -> FormSection:
        """iota*(W-part of xi ⌟ u) (without tau); zero for the trivialization lift."""
        p, q = u.space.bidegree
        target = u.space.sibling((p - 1, q))
        if self.W is None:
            return target.zeros()
        from .forms import VerticalVectorField

        v = VerticalVectorField(self.space.torus, self.space.disc, self.W)
        return contract(v, u)


def _dbar_of_field(space: FormSpace, W: np.ndarray) -> np.ndarray:
    """Componentwise dbar of an untwisted vertical field: K[a,c] = d W_a / d z̄_c."""
    n = space.n
    torus = space.torus
    if isinstance(space.disc, Spectral):
        # differentiate untwisted modes: same multiplier with chi = 0
        flat0 = make_flat_bundle(torus, np.zeros(2 * n))
        aux = make_space(torus, flat0, (0, 0), space.disc)
        mu = aux.calculus.mu_zbar  # (n, *mshape)
        return np.stack([np.stack([mu[c] * W[a] for c in range(n)]) for a in range(n)])
    calc = space.calculus
    # plain periodic derivative of a periodic sample field (no automorphy):
    # build dbar from the degree-0 stencils
    N = calc.N
    import scipy.sparse as sp

    from .forms import _central_stencil, _shift_matrix

    offsets, coeffs = _central_stencil(space.disc.order)
    h = 1.0 / N
    D1 = sp.csr_matrix((N, N), dtype=complex)
    for off, c in zip(offsets, coeffs):
        D1 = D1 + (c / h) * _shift_matrix(N, off)
    eye = sp.identity(N, format="csr", dtype=complex)
    Dx = sp.kron(D1, eye, format="csr")
    Dy = sp.kron(eye, D1, format="csr")
    t = calc.t
    Dzbar = (t * Dx - Dy) / (t - np.conj(t))
    out = (Dzbar @ W[0].ravel()).reshape(N, N)
    return out[None, None, :, :]


def trivialization_lift(family: FamilySpec, space: FormSpace,
                        t: Optional[complex] = None,
                        tau: Optional[complex] = None) -> HorizontalLift:
    """The constant-(x,y) lift; for Omega(t) = t (n=1): xi = tau (d/dt + y d/dz)."""
    t = family.t if t is None else t
    tau = family.tau if tau is None else tau
    omega = np.atleast_2d(np.asarray(family.period_map(t), dtype=complex))
    dom = np.atleast_2d(np.asarray(family.dperiod_map(t), dtype=complex))
    K_triv = -dom @ np.linalg.inv(omega - omega.conj())
    return HorizontalLift(
        family=family, t=t, tau=tau, kind="trivialization", space=space,
        W=None, K_triv=K_triv, K_pert=None,
    )


def perturb_lift(lift: HorizontalLift, W: np.ndarray,
                 kind: str = "perturbed") -> HorizontalLift:
    """Add a smooth periodic vertical field to a lift (same base tangent)."""
    W = np.asarray(W, dtype=complex)
    W_total = W if lift.W is None else lift.W + W
    K_pert = _dbar_of_field(lift.space, W_total)
    return HorizontalLift(
        family=lift.family, t=lift.t, tau=lift.tau, kind=kind, space=lift.space,
        W=W_total, K_triv=lift.K_triv, K_pert=K_pert,
    )


def ks_representative(lift: HorizontalLift) -> np.ndarray:
    """iota* dbar xi as a (n, n, *shape) coefficient field (tau included)."""
    return lift.tau * lift.ks_field()


def kappa(lift: HorizontalLift, f: FormSection) -> FormSection:
    """kappa^theta f = iota*(dbar xi) ⌟ f, an E-valued (n-1,1)-form."""
    return contract_ks(ks_representative(lift), f)


def primitive_lift(family: FamilySpec, theta0: HorizontalLift,
                   hodge02: Optional[HodgePackage] = None) -> HorizontalLift:
    """Correct theta0 by eta = (dbar* G ((dbar xi)⌟omega))^sharp (omega-sharp).

    For n=1 there are no (0,2)-forms, so eta = 0 and theta0 is returned as-is.
    """
    space = theta0.space
    n = space.n
    if n == 1:
        return HorizontalLift(
            family=family, t=theta0.t, tau=theta0.tau, kind="primitive",
            space=space, W=theta0.W, K_triv=theta0.K_triv, K_pert=theta0.K_pert,
        )
    if hodge02 is None:
        raise HodgeUnavailable("primitive_lift needs the (0,2) Hodge package")
    torus = space.torus
    flat0 = make_flat_bundle(torus, np.zeros(2 * n))
    sp11 = make_space(torus, flat0, (1, 1), space.disc)
    sp01 = make_space(torus, flat0, (0, 1), space.disc)
    # omega as an untwisted (1,1)-section with constant components (i/2) g_{ab}
    g = torus.kaehler
    comps = sp11.comps
    w = sp11.zeros()
    for ci, (J, K) in enumerate(comps):
        val = 0.5j * g[J[0], K[0]]
        if isinstance(space.disc, Spectral):
            w.coeffs[ci][sp11.calculus.zero_mode_index()] = val
        else:  # pragma: no cover - grid is n=1 only
            w.coeffs[ci][:] = val
    defect = contract_ks(theta0.ks_field(), w)          # (0,2) untwisted
    sol = hodge02.green(defect)
    eta_form = adjoint(assemble_dbar(sp01)).apply(sol)  # (0,1)-form
    # sharp via omega: eta-form = eta ⌟ omega = (i/2) sum_a g_{ab} eta^a dz̄_b
    ginvT = np.linalg.inv(g.T)
    shape = (n,) + space.field_shape
    eta_vec = np.zeros(shape, dtype=complex)
    for a in range(n):
        for b in range(n):
            eta_vec[a] += (2.0 / 1j) * ginvT[a, b] * eta_form.coeffs[b]
    W0 = theta0.W if theta0.W is not None else np.zeros(shape, dtype=complex)
    W_new = W0 - eta_vec
    K_pert = _dbar_of_field(space, W_new)
    return HorizontalLift(
        family=family, t=theta0.t, tau=theta0.tau, kind="primitive", space=space,
        W=W_new, K_triv=theta0.K_triv, K_pert=K_pert,
    )


def primitivity_residual(lift: HorizontalLift, f: FormSection) -> float:
    """|| omega ^ ((dbar xi) ⌟ f) || / ||f|| for a harmonic (n,0)-section f."""
    kf = contract_ks(lift.ks_field(), f)
    if lift.n == 1:
        return 0.0
    wedge = lefschetz_L(kf.space).apply(kf)
    nf = f.norm()
    return wedge.norm() / nf if nf > 0 else 0.0


# ---------------------------------------------------------------------------
# extensions of harmonic (n,0)-sections


@dataclass
class Extension:
    """Fiber data of the canonical extension of a harmonic (n,0)-section f.

    alpha0: dt-component of dbar u on the fiber (= kappa_triv f).
    beta:   dt̄-component of dbar u on the fiber (zero for both kinds).
    phi0:   dt-component of nabla^{1,0} u on the fiber.
    psi:    fiberwise (n,1)-part of dbar u (dbar f; ~0 for harmonic f).
    v:      representative shift (n-1,0)-form (u -> u + dt ^ v), default zero.
    """

    f: FormSection
    kind: str
    alpha0: FormSection
    beta: FormSection
    phi0: FormSection
    psi: FormSection
    v: Optional[FormSection] = None

    def alpha(self) -> FormSection:
        if self.v is None:
            return self.alpha0
        return self.alpha0 - assemble_dbar(self.v.space).apply(self.v)

    def phi(self) -> FormSection:
        if self.v is None:
            return self.phi0
        return self.phi0 - assemble_nabla10(self.v.space).apply(self.v)


def make_extension(family: FamilySpec, f: FormSection,
                   admissibility_tol: float = 1e-6) -> Extension:
    """Canonical admissible extension of f: constant (flat) or theta-flow (positive).

    Raises ExtensionNotAdmissible when iota* L^{1,0} dbar u cannot be made to
    vanish, which for the constant extension happens iff nabla f != 0.
    """
    space = f.space
    n = space.n
    torus = space.torus
    t = complex(family.t)
    omega = np.atleast_2d(np.asarray(family.period_map(t), dtype=complex))
    dom = np.atleast_2d(np.asarray(family.dperiod_map(t), dtype=complex))
    A = np.linalg.inv(omega - omega.conj())
    K_triv = -dom @ A
    alpha0 = contract_ks(
        K_triv.reshape((n, n) + (1,) * len(space.field_shape)).astype(complex), f
    )
    psi = assemble_dbar(space).apply(f)
    nf = max(f.norm(), 1e-300)
    if space.bundle.is_flat:
        # constant extension in the hat-frame; admissible iff f has zero derivative
        grad = _plain_gradient_norm(f)
        if grad > admissibility_tol * nf:
            raise ExtensionNotAdmissible(
                f"constant extension of a non-constant section (residual {grad:.3e})"
            )
        trace = complex(np.trace(dom @ A))
        phi0 = trace * f
        beta = space.zeros()
        return Extension(f=f, kind="constant", alpha0=alpha0, beta=beta,
                         phi0=phi0, psi=psi)
    # positive bundle (n=1): theta-flow extension, holomorphic in t; it is only
    # defined on holomorphic sections (the heat flow extends the theta frame)
    if psi.norm() > admissibility_tol * nf:
        raise ExtensionNotAdmissible(
            f"theta-flow extension of a non-holomorphic section "
            f"(dbar residual {psi.norm() / nf:.3e})"
        )
    calc = space.calculus
    d = space.bundle.degree
    s = t.imag
    F = f.coeffs[0]
    Dz = calc.Dz
    pz = calc.phi_z
    nablaF = (Dz @ F.ravel()).reshape(F.shape) - pz * F
    nabla2F = (Dz @ nablaF.ravel()).reshape(F.shape) - pz * nablaF
    # plain d^2/dz^2 via (nabla + phi_z)^2; the grid operators only ever touch
    # genuine sections, the polynomial-in-y factors act pointwise afterwards
    dz2F = nabla2F + 2.0 * pz * nablaF + (pz**2 - np.pi * d / s) * F
    heat = dz2F / (4j * np.pi * d)
    y = calc.y
    S_tot = y * nablaF + F / (t - np.conj(t)) + heat - 1j * np.pi * d * y**2 * F
    phi0 = space.section(S_tot[None])
    beta = space.zeros()
    return Extension(f=f, kind="theta", alpha0=alpha0, beta=beta,
                     phi0=phi0, psi=psi)


def _plain_gradient_norm(f: FormSection) -> float:
    """Norm of the plain z-derivatives of the coefficients of f."""
    space = f.space
    if isinstance(space.disc, Spectral):
        calc = space.calculus
        tot = 0.0
        for a in range(space.n):
            tot += float(np.sum(np.abs(calc.mu_z[a] * f.coeffs) ** 2))
            tot += float(np.sum(np.abs(calc.mu_zbar[a] * f.coeffs) ** 2))
        return float(np.sqrt(tot))
    calc = space.calculus
    g1 = (calc.Dz @ f.coeffs[0].ravel())
    g2 = (calc.Dzbar @ f.coeffs[0].ravel())
    return float(np.sqrt(np.sum(np.abs(g1) ** 2 + np.abs(g2) ** 2) / calc.N**2))


# ---------------------------------------------------------------------------
# restricted contractions and Lie derivatives


def xi_contract_u(lift: HorizontalLift, ext: Extension) -> FormSection:
    """iota*(xi ⌟ u), an (n-1,0)-form."""
    out = lift.tau * lift.vertical_contract(ext.f)
    if ext.v is not None:
        out = out + lift.tau * ext.v
    return out


def xi_contract_dbar_u(lift: HorizontalLift, ext: Extension) -> FormSection:
    """iota*(xi ⌟ dbar u) = gamma + alpha, an (n-1,1)-form."""
    gamma = lift.tau * lift.vertical_contract(ext.psi)
    return gamma + lift.tau * ext.alpha()


def xi_contract_nabla_u(lift: HorizontalLift, ext: Extension) -> FormSection:
    """iota*(xi ⌟ nabla^{1,0} u) = tau (phi0 - nabla v), an (n,0)-form."""
    return lift.tau * ext.phi()


def lie_derivative_10(lift: HorizontalLift, ext: Extension) -> FormSection:
    """iota* L^{1,0}_xi u = nabla^{1,0}(iota*(xi ⌟ u)) + iota*(xi ⌟ nabla^{1,0} u).

    Independent of the representative shift v (the nabla v contributions cancel).
    """
    w = lift.tau * lift.vertical_contract(ext.f)
    nabla = assemble_nabla10(w.space)
    return nabla.apply(w) + lift.tau * ext.phi0


def lie_derivative_01(lift: HorizontalLift, ext: Extension) -> FormSection:
    """iota* L^{0,1}_{bar xi} u = iota*(bar xi ⌟ dbar u) = conj-contraction + tau̅ beta."""
    space = ext.f.space
    out = np.conj(lift.tau) * ext.beta
    if lift.W is not None and ext.psi.norm() > 0:
        # bar W ⌟ psi: contract the conjugate field into the dz̄-slots of psi;
        # for an (n,1)-form psi this lands in (n,0).
        psi = ext.psi
        p, q = psi.space.bidegree
        target = psi.space.sibling((p, q - 1))
        res = target.zeros()
        from .forms import _remove, _convolve_modes

        for di, (J, K) in enumerate(psi.space.comps):
            for c in K:
                sgn, Knew = _remove(K, c)
                ci = [i for i, comp in enumerate(target.comps) if comp == (J, Knew)][0]
                fld = np.conj(lift.W[c])
                sgn2 = sgn * ((-1) ** p)
                if isinstance(space.disc, Spectral):
                    res.coeffs[ci] += sgn2 * _convolve_modes(
                        np.conj(lift.W[c])[tuple(slice(None, None, -1) for _ in lift.W[c].shape)],
                        psi.coeffs[di],
                    )
                else:
                    res.coeffs[ci] += sgn2 * fld * psi.coeffs[di]
        out = out + np.conj(lift.tau) * res
    return out


# ---------------------------------------------------------------------------
# representatives


@dataclass
class RepresentativeSet:
    """Berndtsson representative data of one harmonic section at the base point."""

    f: FormSection
    lift: HorizontalLift
    ext: Extension                  # with the correction v = V1 + V2 installed
    alpha: FormSection              # dt-component of dbar u on the fiber
    beta: FormSection
    phi: FormSection                # dt-component of nabla u on the fiber
    gamma: FormSection              # iota*(xi ⌟ psi)
    v1: FormSection
    v2: FormSection
    primitive_ok: bool = False
    orthogonality_ok: bool = False

    def xi_u(self) -> FormSection:
        return xi_contract_u(self.lift, self.ext)

    def xi_dbar_u(self) -> FormSection:
        return xi_contract_dbar_u(self.lift, self.ext)

    def xi_nabla_u(self) -> FormSection:
        return xi_contract_nabla_u(self.lift, self.ext)


def berndtsson_representative(family: FamilySpec, lift: HorizontalLift,
                              f: FormSection, pkg_n0: HodgePackage,
                              pkg_n2: Optional[HodgePackage] = None,
                              tol: float = 1e-6) -> RepresentativeSet:
    """Correct the canonical extension so that (a) xi ⌟ dbar u is primitive,
    (b) iota*(xi ⌟ nabla u) is orthogonal to the non-holomorphic part, and
    (c) the Dolbeault class matches (dbar xi) ⌟ f.
    """
    space = f.space
    n = space.n
    if pkg_n0 is None:
        raise HodgeUnavailable("berndtsson_representative needs the (n,0) package")
    ext = make_extension(family, f, admissibility_tol=tol)
    gamma = lift.tau * lift.vertical_contract(ext.psi)
    alpha0 = lift.tau * ext.alpha0

    # V1: kills the omega-trace of gamma + alpha0 (only possible/needed for n >= 2)
    sp_lower = space.sibling((n - 1, 0))
    if n >= 2:
        if pkg_n2 is None:
            raise HodgeUnavailable("berndtsson_representative needs the (n,2) package")
        src = gamma + alpha0
        wedge = lefschetz_L(src.space).apply(src)           # (n,2)
        sol = pkg_n2.green(wedge)
        dstar = adjoint(assemble_dbar(space.sibling((n, 1)))).apply(sol)  # (n,1)
        v1 = lefschetz_Lambda(dstar.space).apply(dstar)     # (n-1,0)
    else:
        v1 = sp_lower.zeros()

    # V2: solves nabla V2 = P_perp phi0 (G' = G on (n,0)-forms)
    phi0 = lift.tau * ext.phi0
    p_perp_phi = phi0 - pkg_n0.harmonic_project(phi0)
    v2 = adjoint(assemble_nabla10(sp_lower)).apply(pkg_n0.green(p_perp_phi))

    v = v1 + v2
    # install the correction, undoing the tau factor carried above
    ext.v = (1.0 / lift.tau) * v if lift.tau != 0 else v

    rep = RepresentativeSet(
        f=f, lift=lift, ext=ext,
        alpha=lift.tau * ext.alpha(), beta=np.conj(lift.tau) * ext.beta,
        phi=lift.tau * ext.phi(), gamma=gamma, v1=v1, v2=v2,
    )
    nf = max(f.norm(), 1e-300)
    prim = rep.xi_dbar_u()
    if n == 1:
        rep.primitive_ok = True
    else:
        rep.primitive_ok = lefschetz_L(prim.space).apply(prim).norm() <= tol * nf
    orth = rep.xi_nabla_u()
    rep.orthogonality_ok = (orth - pkg_n0.harmonic_project(orth)).norm() <= tol * nf
    return rep


def class_match_residual(rep: RepresentativeSet, pkg_n11: HodgePackage) -> float:
    """Harmonic part of (dbar xi) ⌟ f - xi ⌟ dbar u (property c), relative to ||f||."""
    kf = kappa(rep.lift, rep.f)
    diff = kf - rep.xi_dbar_u()
    nf = max(rep.f.norm(), 1e-300)
    return pkg_n11.harmonic_project(diff).norm() / nf
