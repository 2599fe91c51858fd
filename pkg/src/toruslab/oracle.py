"""Independent ground truth: theta frames, exact flat spectra, FD curvature, scans.

Everything here is computed from closed forms or direct quadrature, deliberately
bypassing the operator-assembly machinery, so it can serve as an oracle for the
discrete pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import StencilQuadratureFailure
from .forms import FormSection, FormSpace, Grid, make_space, pair_l2
from .geometry import (
    BundleData,
    FamilySpec,
    LatticeTorus,
    make_positive_bundle,
    make_torus,
)


# ---------------------------------------------------------------------------
# theta frames


@dataclass
class ThetaFrame:
    """A frame of d holomorphic canonical sections on one positive-bundle fiber.

    Sections are represented as (1,0)-forms theta_a(z) dz in the grid gauge,
    a = 0..d-1; the series is truncated when terms drop below `truncation`.
    """

    t: complex
    d: int
    space: FormSpace
    sections: List[FormSection]
    truncation: float = 1e-16

    def gram(self) -> np.ndarray:
        d = self.d
        G = np.zeros((d, d), dtype=complex)
        for a in range(d):
            for b in range(d):
                G[a, b] = pair_l2(self.sections[b], self.sections[a])
        return (G + G.conj().T) / 2.0


def theta_samples(t: complex, d: int, a: int, x: np.ndarray, y: np.ndarray,
                  truncation: float = 1e-16) -> np.ndarray:
    """Level-d theta series with characteristic a/d evaluated at z = x + t y.

    theta_a(z) = sum_m exp(pi i d t (m + a/d)^2 + 2 pi i d z (m + a/d)); it is
    periodic in x and quasi-periodic in y with the level-d factor of automorphy.
    """
    s = t.imag
    # term magnitude ~ exp(-pi d s (m + a/d + y)^2 + pi d s y^2); with y in [0,1)
    # a symmetric window around -y covers everything above `truncation`.
    reach = np.sqrt(max(-np.log(truncation), 1.0) / (np.pi * d * s)) + 2.0
    m_lo = int(np.floor(-1.0 - reach))
    m_hi = int(np.ceil(reach)) + 1
    z = x + t * y
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for m in range(m_lo, m_hi + 1):
        c = m + a / d
        out += np.exp(1j * np.pi * d * t * c * c + 2j * np.pi * d * z * c)
    return out


def theta_frame(t: complex, d: int, disc: Grid,
                space: Optional[FormSpace] = None,
                truncation: float = 1e-16) -> ThetaFrame:
    """Holomorphic frame of the degree-d canonical sections on the fiber at t."""
    if space is None:
        torus = make_torus(1, [[t]])
        bundle = make_positive_bundle(torus, d)
        space = make_space(torus, bundle, (1, 0), disc)
    calc = space.calculus
    sections = []
    for a in range(d):
        samples = theta_samples(t, d, a, calc.x, calc.y, truncation)
        sections.append(space.section(samples[None, :, :]))
    return ThetaFrame(t=t, d=d, space=space, sections=sections, truncation=truncation)


# ---------------------------------------------------------------------------
# finite-difference Chern curvature of the L2 metric


def _frame_gram(t: complex, d: int, disc: Grid) -> np.ndarray:
    frame = theta_frame(t, d, disc)
    return frame.gram()


def fd_chern_curvature_H(family: FamilySpec, d: int, disc: Grid,
                         step: float = 1e-3,
                         harmonic_basis: Optional[Sequence[FormSection]] = None,
                         ) -> np.ndarray:
    """Curvature of the L2 metric on the holomorphic frame, by a 3x3 Gram stencil.

    Returns the Hermitian matrix of the curvature form in the direction tau,
    expressed in the orthonormal harmonic frame at the base point when
    `harmonic_basis` is given (otherwise in the theta frame itself).
    """
    t = family.t
    G = {}
    for px, py in product((-1, 0, 1), repeat=2):
        tp = t + step * (px + 1j * py)
        G[(px, py)] = _frame_gram(tp, d, disc)
    G0 = G[(0, 0)]
    cond = np.linalg.cond(G0)
    if not np.isfinite(cond) or cond > 1e12:
        raise StencilQuadratureFailure(f"Gram matrix condition {cond:.3e}")
    eigs = np.linalg.eigvalsh(G0)
    if eigs.min() <= 0:
        raise StencilQuadratureFailure("Gram matrix is not positive definite")

    h = step
    dX = (G[(1, 0)] - G[(-1, 0)]) / (2 * h)
    dY = (G[(0, 1)] - G[(0, -1)]) / (2 * h)
    dXX = (G[(1, 0)] - 2 * G0 + G[(-1, 0)]) / h**2
    dYY = (G[(0, 1)] - 2 * G0 + G[(0, -1)]) / h**2
    dt_G = (dX - 1j * dY) / 2.0
    dtbar_G = (dX + 1j * dY) / 2.0
    dt_dtbar_G = (dXX + dYY) / 4.0

    Ginv = np.linalg.inv(G0)
    # curvature form on the frame: Theta(u, v) = v^H M u with
    # M = -(dt dtbar G - dtbar G Ginv dt G); for G = e^{-phi} this is G phi_{t tbar}.
    M = -(dt_dtbar_G - dtbar_G @ Ginv @ dt_G)
    M = (M + M.conj().T) / 2.0
    tau = complex(family.tau)
    M = (abs(tau) ** 2) * M
    if harmonic_basis is None:
        return M
    # transition to the (orthonormal) harmonic basis u_i = sum_a C[a,i] theta_a
    frame = theta_frame(t, d, disc)
    B = np.zeros((d, len(harmonic_basis)), dtype=complex)
    for a in range(d):
        for i, u in enumerate(harmonic_basis):
            B[a, i] = pair_l2(u, frame.sections[a])
    C = np.linalg.solve(G0, B)
    T = C.conj().T @ M @ C
    return (T + T.conj().T) / 2.0


# ---------------------------------------------------------------------------
# exact flat spectra and rank scans


def _flat_mode_eigenvalue(torus: LatticeTorus, kappa_x: np.ndarray,
                          kappa_y: np.ndarray) -> np.ndarray:
    """dbar-Laplacian eigenvalue of the shifted mode kappa = k + chi (closed form)."""
    omega = torus.period
    A = np.linalg.inv(omega - omega.conj())
    # mu_zbar[a] = 2 pi i sum_b (kappa_x_b (Omega A)_{ba} - kappa_y_b A_{ba})
    v = 2j * np.pi * (
        np.tensordot(omega @ A, kappa_x, axes=([0], [0]))
        - np.tensordot(A, kappa_y, axes=([0], [0]))
    )  # shape (n, ...)
    ginv = np.linalg.inv(torus.kaehler)
    lam = 2.0 * np.einsum("a...,ab,b...->...", v.conj(), ginv.conj().T, v)
    return lam.real


def exact_flat_spectrum(torus: LatticeTorus, chi, bidegree: Tuple[int, int],
                        M: int = 8) -> np.ndarray:
    """Sorted dbar-Laplacian spectrum of the flat bundle chi on modes |k| <= M.

    Matches the spectral-backend discrete Laplacian exactly, multiplicities
    included (each mode eigenvalue repeats once per form component).
    """
    from math import comb

    n = torus.n
    chi = np.mod(np.asarray(chi, dtype=float).ravel(), 1.0)
    k = np.arange(-M, M + 1, dtype=float)
    grids = np.meshgrid(*([k] * (2 * n)), indexing="ij")
    kappa_x = np.stack([grids[a] + chi[a] for a in range(n)])
    kappa_y = np.stack([grids[n + a] + chi[n + a] for a in range(n)])
    lam = _flat_mode_eigenvalue(torus, kappa_x, kappa_y).ravel()
    p, q = bidegree
    ncomp = comb(n, p) * comb(n, q)
    return np.sort(np.tile(lam, ncomp))


def is_jump_point(t: complex, target: complex = 1j, tol: float = 1e-9) -> bool:
    """Decide target in Z + t Z by solving the 2x2 real system for (m, n)."""
    s = t.imag
    nn = target.imag / s
    mm = target.real - nn * t.real
    return abs(nn - round(nn)) <= tol and abs(mm - round(mm)) <= tol


def rank_scan(family: FamilySpec, t_samples: Sequence[complex],
              M: int = 8) -> List[Tuple[complex, int, float]]:
    """Exact kernel count and spectral gap of the flat family at each sample.

    Returns rows (t, rank, lambda1) with rank = dim of the holomorphic canonical
    sections on the fiber (kernel of the dbar-Laplacian on top-degree forms) and
    lambda1 the smallest positive closed-form eigenvalue.
    """
    rows = []
    for t in t_samples:
        torus = family.torus_at(t)
        bundle = family.bundle_at(t)
        lam = exact_flat_spectrum(torus, bundle.chi, (torus.n, 0), M=M)
        # the kernel is exact: a shifted mode sits at zero iff kappa = 0 exactly
        chi = bundle.chi
        dist = np.minimum(chi, 1.0 - chi)
        rank = 1 if np.all(dist <= 1e-9) else 0
        positive = lam[lam > max(1e-9, 1e-9 * lam.max())]
        lam1 = float(positive.min()) if positive.size else float("nan")
        rows.append((complex(t), rank, lam1))
    return rows


def write_rank_scan_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_re", "t_im", "rank", "lambda1"])
        for t, rank, lam1 in rows:
            writer.writerow([f"{t.real:.12g}", f"{t.imag:.12g}", rank, f"{lam1:.12g}"])
