"""Discrete E-valued (p,q)-forms on a fiber and the first-order operator algebra.

Two backends:

* Spectral (flat bundles): sections are expanded in the shifted Fourier basis
  e_k(x,y) = exp(2 pi i ((k_x + chi_x).x + (k_y + chi_y).y)) on the universal
  trivialization z = x + Omega y.  Every operator is mode-diagonal with a small
  component block per mode, so assembly and solves are exact and cheap.

* Grid (positive bundles, n=1): sections are sample arrays F[i,j] on the unit
  (x,y)-torus, periodic in x and quasi-periodic in y with the level-d factor of
  automorphy.  Derivatives are central differences (order 4 by default) with the
  automorphy wrap; operators are scipy.sparse matrices.

Bidegree components are enumerated lexicographically: holomorphic index set J
major, anti-holomorphic K minor, each in increasing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    BidegreeOverflow,
    BidegreeUnderflow,
    DiscMismatch,
    ShapeMismatch,
)
from .geometry import BundleData, LatticeTorus


# ---------------------------------------------------------------------------
# discretization descriptors


@dataclass(frozen=True)
class Spectral:
    """Fourier-mode discretization with cutoff M per real direction."""

    M: int = 8


@dataclass(frozen=True)
class Grid:
    """N x N sample grid with central differences of the given order."""

    N: int = 64
    order: int = 4


Disc = Union[Spectral, Grid]


def _component_list(n, p, q):
    return [
        (J, K)
        for J in combinations(range(n), p)
        for K in combinations(range(n), q)
    ]


def _insert(tup, a):
    """Sign and sorted index set for e_a ^ e_tup; (0, None) if a already present."""
    if a in tup:
        return 0, None
    pos = sum(1 for x in tup if x < a)
    return (-1) ** pos, tuple(sorted(tup + (a,)))


def _remove(tup, a):
    """Sign and index set for the interior product slot removal."""
    if a not in tup:
        return 0, None
    pos = tup.index(a)
    return (-1) ** pos, tuple(x for x in tup if x != a)


# ---------------------------------------------------------------------------
# calculus contexts (cached per torus/bundle/disc)


class _SpectralCalculus:
    def __init__(self, torus: LatticeTorus, bundle: BundleData, disc: Spectral):
        n, M = torus.n, disc.M
        self.torus, self.bundle, self.disc = torus, bundle, disc
        self.mshape = (2 * M + 1,) * (2 * n)
        k = np.arange(-M, M + 1, dtype=float)
        grids = np.meshgrid(*([k] * (2 * n)), indexing="ij")
        chi = bundle.chi
        kappa_x = np.stack([grids[a] + chi[a] for a in range(n)])        # (n, *mshape)
        kappa_y = np.stack([grids[n + a] + chi[n + a] for a in range(n)])
        omega = torus.period
        A = np.linalg.inv(omega - omega.conj())
        MxZ = -omega.conj() @ A          # dx_b/dz_a = MxZ[b,a]... see below
        MyZ = A
        MxZb = omega @ A
        MyZb = -A
        # mu_z[a] multiplies e_k by the d/dz_a derivative:
        #   2 pi i sum_b (kappa_x_b * dx_b/dz_a + kappa_y_b * dy_b/dz_a)
        # with dx_b/dz_a = (I - Omega A)_{ba} = (-Omega.conj A)_{ba}, dy_b/dz_a = A_{ba}.
        self.mu_z = 2j * np.pi * (
            np.tensordot(MxZ, kappa_x, axes=([0], [0]))
            + np.tensordot(MyZ, kappa_y, axes=([0], [0]))
        )
        self.mu_zbar = 2j * np.pi * (
            np.tensordot(MxZb, kappa_x, axes=([0], [0]))
            + np.tensordot(MyZb, kappa_y, axes=([0], [0]))
        )

    def zero_mode_index(self):
        M = self.disc.M
        return (M,) * len(self.mshape)


_FD_STENCILS = {
    4: ([-2, -1, 1, 2], np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    6: ([-3, -2, -1, 1, 2, 3], np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0),
    8: (
        [-4, -3, -2, -1, 1, 2, 3, 4],
        np.array([3.0, -32.0, 168.0, -672.0, 672.0, -168.0, 32.0, -3.0]) / 840.0,
    ),
}


def _central_stencil(order):
    """First-derivative central-difference offsets/coefficients of a given order."""
    if order not in _FD_STENCILS:
        p = order // 2
        ks = np.arange(1, p + 1)
        # c_k = (-1)^{k+1} (p!)^2 / (k (p-k)! (p+k)!)
        from math import factorial

        cs = np.array(
            [
                ((-1) ** (k + 1)) * factorial(p) ** 2 / (k * factorial(p - k) * factorial(p + k))
                for k in ks
            ]
        )
        offsets = [-k for k in ks[::-1]] + [int(k) for k in ks]
        coeffs = np.concatenate([-cs[::-1], cs])
        _FD_STENCILS[order] = (offsets, coeffs)
    return _FD_STENCILS[order]


class _GridCalculus:
    """n=1 grid backend: derivative matrices and weight data for degree d."""

    def __init__(self, torus: LatticeTorus, bundle: BundleData, disc: Grid):
        if torus.n != 1:
            raise DiscMismatch("grid backend supports n=1 only")
        self.torus, self.bundle, self.disc = torus, bundle, disc
        N, order = disc.N, disc.order
        t = complex(torus.period[0, 0])
        d = bundle.degree
        self.t, self.d, self.N = t, d, N
        s = t.imag
        self.s = s
        idx = np.arange(N)
        self.x = (idx[:, None] / N) * np.ones((1, N))
        self.y = np.ones((N, 1)) * (idx[None, :] / N)

        offsets, coeffs = _central_stencil(order)
        h = 1.0 / N
        eye = sp.identity(N, format="csr", dtype=complex)

        # Differentiation is done in the Gaussian gauge H = e^theta F with
        # theta = i pi d t y^2 + 2 pi i d x y.  H is periodic in y and Bloch
        # quasi-periodic in x (factor e^{2 pi i d y}), and is uniformly scaled,
        # so central differences on H converge at full stencil order even though
        # F itself varies over many orders of magnitude across the cell:
        #   dF/dx = e^{-theta} d/dx(e^theta F) - (2 pi i d y) F
        #   dF/dy = e^{-theta} d/dy(e^theta F) - (2 pi i d z) F,  z = x + t y.
        theta_g = 1j * np.pi * d * t * self.y**2 + 2j * np.pi * d * self.x * self.y
        E = sp.diags(np.exp(theta_g).ravel(), format="csr")
        Einv = sp.diags(np.exp(-theta_g).ravel(), format="csr")

        # plain periodic stencil along y (axis 1)
        Dy1 = sp.csr_matrix((N, N), dtype=complex)
        for off, c in zip(offsets, coeffs):
            Dy1 = Dy1 + (c / h) * _shift_matrix(N, off)
        Dy_per = sp.kron(eye, Dy1, format="csr")
        zfield = (self.x + t * self.y).ravel()
        self.Dy = Einv @ Dy_per @ E - sp.diags(2j * np.pi * d * zfield, format="csr")

        # stencil along x (axis 0) with the Bloch wrap factor e^{+-2 pi i d y}
        rows, cols, vals = [], [], []
        j_all = np.arange(N)
        bloch = np.exp(2j * np.pi * d * j_all / N)
        for off, c in zip(offsets, coeffs):
            for i in range(N):
                ii = i + off
                wrap = 0
                while ii >= N:
                    ii -= N
                    wrap += 1
                while ii < 0:
                    ii += N
                    wrap -= 1
                rows.append(i * N + j_all)
                cols.append(ii * N + j_all)
                vals.append((c / h) * bloch**wrap)
        Dx_per = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(N * N, N * N),
        )
        self.Dx = Einv @ Dx_per @ E - sp.diags(2j * np.pi * d * self.y.ravel(), format="csr")

        denom = t - np.conj(t)  # 2 i s
        self.Dz = (-np.conj(t) / denom) * self.Dx + (1.0 / denom) * self.Dy
        self.Dzbar = (t / denom) * self.Dx + (-1.0 / denom) * self.Dy

        # weight data for the translation-invariant potential phi = 2 pi d y^2 s
        y = self.y
        self.phi = 2.0 * np.pi * d * y**2 * s
        self.phi_z = -2j * np.pi * d * y           # at fixed t
        self.phi_zbar = 2j * np.pi * d * y
        self.phi_zzbar = np.pi * d / s             # = pi d g, constant
        # t-derivatives at fixed z (holomorphic gauge)
        self.phi_t = 1j * np.pi * d * y**2
        self.phi_tzbar = -np.pi * d * y / s
        self.phi_ztbar = -np.pi * d * y / s
        self.phi_ttbar = np.pi * d * y**2 / s

    def mul(self, samples):
        """Sparse diagonal multiplication operator for an (N,N) sample array."""
        return sp.diags(np.asarray(samples, dtype=complex).ravel(), format="csr")


def _shift_matrix(N, off):
    """Periodic shift: (S F)[i] = F[i + off mod N]."""
    idx = (np.arange(N) + off) % N
    return sp.csr_matrix(
        (np.ones(N), (np.arange(N), idx)), shape=(N, N), dtype=complex
    )


_CALC_CACHE: dict = {}


def _calculus(torus, bundle, disc):
    key = (id(torus), id(bundle), disc)
    ctx = _CALC_CACHE.get(key)
    if ctx is None:
        if isinstance(disc, Spectral):
            if not bundle.is_flat:
                raise DiscMismatch("spectral discretization requires a flat bundle")
            ctx = _SpectralCalculus(torus, bundle, disc)
        elif isinstance(disc, Grid):
            if bundle.is_flat:
                raise DiscMismatch("grid discretization requires a positive bundle")
            ctx = _GridCalculus(torus, bundle, disc)
        else:
            raise DiscMismatch(f"unknown discretization {disc!r}")
        _CALC_CACHE[key] = ctx
    return ctx


# ---------------------------------------------------------------------------
# spaces, sections, operators


@dataclass(frozen=True)
class FormSpace:
    torus: LatticeTorus
    bundle: BundleData
    bidegree: tuple
    disc: Disc

    @property
    def n(self):
        return self.torus.n

    @property
    def comps(self):
        p, q = self.bidegree
        return _component_list(self.n, p, q)

    @property
    def ncomp(self):
        p, q = self.bidegree
        return comb(self.n, p) * comb(self.n, q)

    @property
    def calculus(self):
        return _calculus(self.torus, self.bundle, self.disc)

    @property
    def field_shape(self):
        if isinstance(self.disc, Spectral):
            return self.calculus.mshape
        return (self.disc.N, self.disc.N)

    @property
    def dim(self):
        return self.ncomp * int(np.prod(self.field_shape))

    def zeros(self) -> "FormSection":
        return FormSection(self, np.zeros((self.ncomp,) + self.field_shape, dtype=complex))

    def section(self, coeffs) -> "FormSection":
        arr = np.asarray(coeffs, dtype=complex)
        if arr.shape != (self.ncomp,) + self.field_shape:
            arr = arr.reshape((self.ncomp,) + self.field_shape)
        return FormSection(self, arr)

    def sibling(self, bidegree) -> "FormSpace":
        return make_space(self.torus, self.bundle, bidegree, self.disc)

    # pointwise metric on components (spectral: constant; grid: n=1 scalar)
    def comp_metric(self) -> np.ndarray:
        """Hermitian ncomp x ncomp matrix P with P[c,c'] = <e_{c'}, e_c> pointwise."""
        g = self.torus.kaehler
        ginv = np.linalg.inv(g)
        comps = self.comps
        P = np.zeros((len(comps), len(comps)), dtype=complex)
        for c, (J, K) in enumerate(comps):
            for cc, (Jp, Kp) in enumerate(comps):
                hol = np.linalg.det(2.0 * ginv[np.ix_(Jp, J)]) if J else 1.0
                anti = np.linalg.det(2.0 * ginv.conj()[np.ix_(Kp, K)]) if K else 1.0
                P[c, cc] = hol * anti
        return (P + P.conj().T) / 2.0


def make_space(torus, bundle, bidegree, disc) -> FormSpace:
    p, q = bidegree
    if not (0 <= p <= torus.n and 0 <= q <= torus.n):
        raise BidegreeOverflow(f"bidegree {bidegree} out of range for n={torus.n}")
    _calculus(torus, bundle, disc)  # validates disc/bundle match, warms cache
    return FormSpace(torus, bundle, (p, q), disc)


@dataclass
class FormSection:
    space: FormSpace
    coeffs: np.ndarray

    def copy(self):
        return FormSection(self.space, self.coeffs.copy())

    def __add__(self, other):
        _same_space(self, other)
        return FormSection(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_space(self, other)
        return FormSection(self.space, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return FormSection(self.space, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FormSection(self.space, -self.coeffs)

    def norm(self):
        return float(np.sqrt(max(pair_l2(self, self).real, 0.0)))


def _same_space(u, v):
    if u.space.bidegree != v.space.bidegree or u.space.field_shape != v.space.field_shape:
        raise ShapeMismatch(
            f"sections live in different spaces: {u.space.bidegree} vs {v.space.bidegree}"
        )


@dataclass(frozen=True)
class VerticalVectorField:
    """Section of T^{1,0} of the fiber: components of sum v_a d/dz_a.

    Coefficients are untwisted: Fourier modes without character shift (spectral)
    or plain periodic samples (grid).
    """

    torus: LatticeTorus
    disc: Disc
    comps: np.ndarray  # (n, *field_shape)


class OperatorMatrix:
    """Linear map between two FormSpaces.

    kind "mode":   data has shape (ncomp_cod, ncomp_dom, *mshape) and acts
                   mode-diagonally (broadcastable trailing dims allowed).
    kind "sparse": data is a scipy sparse matrix of shape (cod.dim, dom.dim).
    """

    def __init__(self, domain: FormSpace, codomain: FormSpace, kind: str, data):
        self.domain = domain
        self.codomain = codomain
        self.kind = kind
        self.data = data

    @property
    def shape(self):
        return (self.codomain.dim, self.domain.dim)

    def apply(self, u: FormSection) -> FormSection:
        if u.space.bidegree != self.domain.bidegree or u.space.field_shape != self.domain.field_shape:
            raise ShapeMismatch("operator domain does not match section space")
        if self.kind == "mode":
            out = np.einsum("cd...,d...->c...", _bc(self.data, self.domain), u.coeffs)
            return FormSection(self.codomain, out)
        vec = self.data @ u.coeffs.ravel()
        return FormSection(
            self.codomain, vec.reshape((self.codomain.ncomp,) + self.codomain.field_shape)
        )

    def __call__(self, u):
        return self.apply(u)

    def compose(self, other: "OperatorMatrix") -> "OperatorMatrix":
        """self o other."""
        if self.kind == "mode" and other.kind == "mode":
            a = _bc(self.data, self.domain)
            b = _bc(other.data, other.domain)
            return OperatorMatrix(
                other.domain, self.codomain, "mode", np.einsum("cd...,de...->ce...", a, b)
            )
        return OperatorMatrix(
            other.domain, self.codomain, "sparse", _as_sparse(self) @ _as_sparse(other)
        )

    def __matmul__(self, other):
        return self.compose(other)

    def __add__(self, other):
        if self.kind == "mode" and other.kind == "mode":
            return OperatorMatrix(
                self.domain,
                self.codomain,
                "mode",
                _bc(self.data, self.domain) + _bc(other.data, other.domain),
            )
        return OperatorMatrix(
            self.domain, self.codomain, "sparse", _as_sparse(self) + _as_sparse(other)
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return OperatorMatrix(self.domain, self.codomain, self.kind, self.data * scalar)

    __rmul__ = __mul__

    def norm(self):
        """Operator norm (exact per-mode for "mode" kind; dense for sparse)."""
        if self.kind == "mode":
            blocks = _bc(self.data, self.domain)
            nc, nd = blocks.shape[:2]
            flat = blocks.reshape(nc, nd, -1)
            svals = np.linalg.svd(np.moveaxis(flat, 2, 0), compute_uv=False)
            return float(svals.max()) if svals.size else 0.0
        m = _as_sparse(self)
        if min(m.shape) == 0:
            return 0.0
        if max(m.shape) <= 4096:
            return float(np.linalg.norm(m.toarray(), 2))
        # power iteration on A* A
        rng = np.random.default_rng(0)
        v = rng.standard_normal(m.shape[1]) + 1j * rng.standard_normal(m.shape[1])
        v /= np.linalg.norm(v)
        for _ in range(50):
            w = m.conj().T @ (m @ v)
            nw = np.linalg.norm(w)
            if nw == 0:
                return 0.0
            v = w / nw
        return float(np.sqrt(nw))


def _bc(data, space):
    """Broadcast mode-kind data to full field shape."""
    target = data.shape[:2] + space.field_shape
    return np.broadcast_to(data, target)


def _as_sparse(op: OperatorMatrix):
    if op.kind == "sparse":
        return op.data
    # densify a mode operator into block-diagonal sparse (rarely needed)
    blocks = _bc(op.data, op.domain)
    nc, nd = blocks.shape[:2]
    nm = int(np.prod(op.domain.field_shape))
    flat = blocks.reshape(nc, nd, nm)
    rows, cols, vals = [], [], []
    for c in range(nc):
        for d in range(nd):
            rows.append(c * nm + np.arange(nm))
            cols.append(d * nm + np.arange(nm))
            vals.append(flat[c, d])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=op.shape,
    )


def zero_operator(domain: FormSpace, codomain: FormSpace) -> OperatorMatrix:
    if isinstance(domain.disc, Spectral):
        data = np.zeros((codomain.ncomp, domain.ncomp) + (1,) * len(domain.field_shape))
        return OperatorMatrix(domain, codomain, "mode", data.astype(complex))
    return OperatorMatrix(
        domain, codomain, "sparse", sp.csr_matrix((codomain.dim, domain.dim), dtype=complex)
    )


def identity_operator(space: FormSpace) -> OperatorMatrix:
    if isinstance(space.disc, Spectral):
        data = np.eye(space.ncomp, dtype=complex).reshape(
            (space.ncomp, space.ncomp) + (1,) * len(space.field_shape)
        )
        return OperatorMatrix(space, space, "mode", data)
    return OperatorMatrix(
        space, space, "sparse", sp.identity(space.dim, dtype=complex, format="csr")
    )


# ---------------------------------------------------------------------------
# Gram matrices and the L2 pairing


class GramMatrix:
    """Inner-product data of a FormSpace.

    Spectral: constant component matrix P (modes are orthonormal).
    Grid:     pointwise positive weight per component sample (n=1: scalar
              component metric x e^{-phi} x quadrature weight 1/N^2).
    """

    def __init__(self, space: FormSpace):
        self.space = space
        if isinstance(space.disc, Spectral):
            self.kind = "spectral"
            self.P = space.comp_metric()
            self.Pinv = np.linalg.inv(self.P)
        else:
            self.kind = "grid"
            calc = space.calculus
            P = space.comp_metric()
            if P.shape != (1, 1):
                raise ShapeMismatch("grid backend expects scalar components")
            scale = P[0, 0].real
            self.w = scale * np.exp(-calc.phi) / calc.disc.N**2

    def inner(self, u: FormSection, v: FormSection) -> complex:
        if self.kind == "spectral":
            nc = self.space.ncomp
            uf = u.coeffs.reshape(nc, -1)
            vf = v.coeffs.reshape(nc, -1)
            return complex(np.einsum("ck,cd,dk->", vf.conj(), self.P, uf))
        return complex(np.sum(v.coeffs.conj() * self.w * u.coeffs))


_GRAM_CACHE: dict = {}


def gram(space: FormSpace) -> GramMatrix:
    key = (id(space.torus), id(space.bundle), space.disc, space.bidegree)
    g = _GRAM_CACHE.get(key)
    if g is None:
        g = GramMatrix(space)
        _GRAM_CACHE[key] = g
    return g


def pair_l2(u: FormSection, v: FormSection) -> complex:
    """L2 inner product (u, v); on (n,0)-forms this is sqrt(-1)^{n^2} int <u ^ v̄, h>."""
    _same_space(u, v)
    return gram(u.space).inner(u, v)


def adjoint(op: OperatorMatrix, gram_domain: Optional[GramMatrix] = None,
            gram_codomain: Optional[GramMatrix] = None) -> OperatorMatrix:
    """Formal adjoint: <A u, v>_cod = <u, A* v>_dom exactly in matrix arithmetic."""
    gd = gram_domain or gram(op.domain)
    gc = gram_codomain or gram(op.codomain)
    if op.kind == "mode":
        # A* = P_dom^{-1} A^H P_cod per mode
        blocks = _bc(op.data, op.domain)
        AH = np.conj(np.swapaxes(blocks, 0, 1))
        out = np.einsum("de,ef...,fc->dc...", gd.Pinv, AH, gc.P)
        return OperatorMatrix(op.codomain, op.domain, "mode", out)
    m = _as_sparse(op)
    wd = gd.w.ravel()
    wc = gc.w.ravel()
    nd = op.domain.ncomp
    nc = op.codomain.ncomp
    Wd_inv = sp.diags(np.tile(1.0 / wd, nd), format="csr")
    Wc = sp.diags(np.tile(wc, nc), format="csr")
    return OperatorMatrix(op.codomain, op.domain, "sparse", Wd_inv @ m.conj().T @ Wc)


# ---------------------------------------------------------------------------
# operator assembly


def assemble_dbar(space: FormSpace) -> OperatorMatrix:
    """dbar: (p,q) -> (p,q+1)."""
    p, q = space.bidegree
    n = space.n
    if q + 1 > n:
        raise BidegreeOverflow(f"dbar out of (p,{q}) with n={n}")
    target = space.sibling((p, q + 1))
    if isinstance(space.disc, Spectral):
        calc = space.calculus
        data = np.zeros((target.ncomp, space.ncomp) + calc.mshape, dtype=complex)
        cidx = {c: i for i, c in enumerate(target.comps)}
        for di, (J, K) in enumerate(space.comps):
            for c in range(n):
                sgn, Knew = _insert(K, c)
                if sgn == 0:
                    continue
                ci = cidx[(J, Knew)]
                data[ci, di] += ((-1) ** p) * sgn * calc.mu_zbar[c]
        return OperatorMatrix(space, target, "mode", data)
    calc = space.calculus
    # n=1: (p,0) -> (p,1), single component each; sign (-1)^p from dz̄ past dz_J
    return OperatorMatrix(space, target, "sparse", ((-1) ** p) * calc.Dzbar)


def assemble_nabla10(space: FormSpace) -> OperatorMatrix:
    """Chern-connection (1,0)-part: (p,q) -> (p+1,q)."""
    p, q = space.bidegree
    n = space.n
    if p + 1 > n:
        raise BidegreeOverflow(f"nabla10 out of ({p},q) with n={n}")
    target = space.sibling((p + 1, q))
    if isinstance(space.disc, Spectral):
        calc = space.calculus
        data = np.zeros((target.ncomp, space.ncomp) + calc.mshape, dtype=complex)
        cidx = {c: i for i, c in enumerate(target.comps)}
        for di, (J, K) in enumerate(space.comps):
            for a in range(n):
                sgn, Jnew = _insert(J, a)
                if sgn == 0:
                    continue
                ci = cidx[(Jnew, K)]
                data[ci, di] += sgn * calc.mu_z[a]
        return OperatorMatrix(space, target, "mode", data)
    calc = space.calculus
    op = calc.Dz - calc.mul(calc.phi_z)
    return OperatorMatrix(space, target, "sparse", op)


def _wedge11(space: FormSpace, C: np.ndarray) -> OperatorMatrix:
    """Wedge with the (1,1)-form sum C_ab dz_a ^ dz̄_b: (p,q) -> (p+1,q+1)."""
    p, q = space.bidegree
    n = space.n
    if p + 1 > n or q + 1 > n:
        raise BidegreeOverflow(f"(1,1)-wedge out of ({p},{q}) with n={n}")
    target = space.sibling((p + 1, q + 1))
    cidx = {c: i for i, c in enumerate(target.comps)}
    block = np.zeros((target.ncomp, space.ncomp), dtype=complex)
    for di, (J, K) in enumerate(space.comps):
        for a in range(n):
            sa, Jnew = _insert(J, a)
            if sa == 0:
                continue
            for b in range(n):
                sb, Knew = _insert(K, b)
                if sb == 0:
                    continue
                # dz_a ^ dz̄_b ^ dz_J ^ dz̄_K = (-1)^p dz_a ^ dz_J ^ dz̄_b ^ dz̄_K
                block[cidx[(Jnew, Knew)], di] += ((-1) ** p) * sa * sb * C[a, b]
    if isinstance(space.disc, Spectral):
        data = block.reshape(block.shape + (1,) * len(space.field_shape)).astype(complex)
        return OperatorMatrix(space, target, "mode", data)
    N = space.disc.N
    eye = sp.identity(N * N, dtype=complex, format="csr")
    mats = [[block[i, j] * eye for j in range(block.shape[1])] for i in range(block.shape[0])]
    return OperatorMatrix(space, target, "sparse", sp.bmat(mats, format="csr"))


def lefschetz_L(space: FormSpace) -> OperatorMatrix:
    """Wedge with omega."""
    g = space.torus.kaehler
    return _wedge11(space, 0.5j * g)


def lefschetz_Lambda(space: FormSpace) -> OperatorMatrix:
    """Adjoint of the omega-wedge: (p,q) -> (p-1,q-1)."""
    p, q = space.bidegree
    if p == 0 or q == 0:
        return zero_operator(space, space.sibling((max(p - 1, 0), max(q - 1, 0))))
    source = space.sibling((p - 1, q - 1))
    return adjoint(lefschetz_L(source))


def curvature_action(space: FormSpace) -> OperatorMatrix:
    """Wedge with Theta(h); the zero operator for flat bundles."""
    p, q = space.bidegree
    n = space.n
    if p + 1 > n or q + 1 > n:
        raise BidegreeOverflow(f"curvature wedge out of ({p},{q}) with n={n}")
    if space.bundle.is_flat:
        return zero_operator(space, space.sibling((p + 1, q + 1)))
    return _wedge11(space, space.bundle.curvature)


# ---------------------------------------------------------------------------
# pointwise products and contraction


def _convolve_modes(a, b):
    """Product of two mode-coefficient arrays (full convolution cropped to the cutoff)."""
    from scipy.signal import fftconvolve

    full = fftconvolve(a, b, mode="full")
    # crop the central (2M+1)^... window
    slices = tuple(
        slice((fs - 1) // 2 - (ms - 1) // 2, (fs - 1) // 2 + (ms - 1) // 2 + 1)
        for fs, ms in zip(full.shape, a.shape)
    )
    return full[slices]


def multiply(field: np.ndarray, u: FormSection) -> FormSection:
    """Multiply a section by a scalar field (mode array or grid samples)."""
    if isinstance(u.space.disc, Spectral):
        out = np.stack([_convolve_modes(field, u.coeffs[c]) for c in range(u.space.ncomp)])
        return FormSection(u.space, out)
    return FormSection(u.space, field * u.coeffs)


def contract(v: VerticalVectorField, u: FormSection) -> FormSection:
    """Interior product of a (1,0) vector field into the holomorphic slots of u."""
    p, q = u.space.bidegree
    if p < 1:
        raise BidegreeUnderflow("contraction needs p >= 1")
    target = u.space.sibling((p - 1, q))
    out = target.zeros()
    cidx = {c: i for i, c in enumerate(target.comps)}
    for di, (J, K) in enumerate(u.space.comps):
        for a in J:
            sgn, Jnew = _remove(J, a)
            ci = cidx[(Jnew, K)]
            if isinstance(u.space.disc, Spectral):
                out.coeffs[ci] += sgn * _convolve_modes(v.comps[a], u.coeffs[di])
            else:
                out.coeffs[ci] += sgn * v.comps[a] * u.coeffs[di]
    return out


def contract_ks(K_field: np.ndarray, u: FormSection, space_hint=None) -> FormSection:
    """Contract a T^{1,0}-valued (0,1)-form K = sum K[a,c] dz̄_c ⊗ d/dz_a into u.

    Computes sum_c dz̄_c ^ (K[a,c] d/dz_a ⌟ u); bidegree (p,q) -> (p-1,q+1).
    K_field has shape (n, n, *field_shape) (constant trailing dims broadcast).
    """
    p, q = u.space.bidegree
    n = u.space.n
    if p < 1:
        raise BidegreeUnderflow("contraction needs p >= 1")
    if q + 1 > n:
        raise BidegreeOverflow("K-contraction overflows antiholomorphic degree")
    target = u.space.sibling((p - 1, q + 1))
    out = target.zeros()
    cidx = {c: i for i, c in enumerate(target.comps)}
    spectral = isinstance(u.space.disc, Spectral)
    for di, (J, Kk) in enumerate(u.space.comps):
        for a in J:
            s_rm, Jnew = _remove(J, a)
            for c in range(n):
                s_ins, Knew = _insert(Kk, c)
                if s_ins == 0:
                    continue
                # dz̄_c ^ dz_{Jnew} ^ dz̄_K = (-1)^{p-1} dz_{Jnew} ^ dz̄_c ^ dz̄_K
                sgn = s_rm * s_ins * ((-1) ** (p - 1))
                ci = cidx[(Jnew, Knew)]
                field = K_field[a, c]
                if spectral:
                    if np.ndim(field) == 0 or field.size == 1:
                        out.coeffs[ci] += sgn * complex(np.ravel(field)[0]) * u.coeffs[di]
                    else:
                        out.coeffs[ci] += sgn * _convolve_modes(field, u.coeffs[di])
                else:
                    out.coeffs[ci] += sgn * field * u.coeffs[di]
    return out


def dump_operator(op: OperatorMatrix, path):
    """Debug export in matrix-market format."""
    from scipy.io import mmwrite

    mmwrite(str(path), _as_sparse(op))
