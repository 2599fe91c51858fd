#!/usr/bin/env python3
"""Curvature of the direct-image field for d = 1, 2, 3 at production resolution.

Runs both internal routes plus the finite-difference Gram oracle on the
degree-d elliptic families and prints a comparison table.  Takes a few minutes.
"""

import argparse
import time

import numpy as np

from toruslab.curvature import curvature_H
from toruslab.family import trivialization_lift
from toruslab.forms import Grid, make_space
from toruslab.geometry import elliptic_family
from toruslab.hodge import build_hodge
from toruslab.oracle import fd_chern_curvature_H


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=complex, default=0.3 + 1.1j)
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--order", type=int, default=10)
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--admissibility", type=float, default=1e-5,
                    help="Extension admissibility gate; loosen for coarse grids.")
    args = ap.parse_args()

    disc = Grid(N=args.N, order=args.order)
    print(f"t = {args.t}, N = {args.N}, order = {args.order}, step = {args.step}")
    print(f"{'d':>2} {'routes_rel':>12} {'fd_rel':>12} {'nakano_min':>12} "
          f"{'sff_min':>12} {'seconds':>8}")
    for d in args.degrees:
        t0 = time.perf_counter()
        fam = elliptic_family(args.t, d=d)
        torus, bundle = fam.torus_at(), fam.bundle_at()
        sp = make_space(torus, bundle, (1, 0), disc)
        pkg0 = build_hodge(sp, expected_kernel=d)
        basis = [f * (1.0 / f.norm()) for f in pkg0.harmonic_basis]
        lift = trivialization_lift(fam, sp)
        report = curvature_H(fam, lift, basis, pkg0,
                             admissibility_tol=args.admissibility)
        fd = fd_chern_curvature_H(fam, d, disc, step=args.step,
                                  harmonic_basis=basis)
        scale = max(float(np.linalg.norm(report.theta_H)), 1e-300)
        fd_rel = np.linalg.norm(report.theta_H - fd) / max(np.linalg.norm(fd), 1e-300)
        sff_min = float(np.linalg.eigvalsh(report.term_sff).min())
        dt = time.perf_counter() - t0
        print(f"{d:>2} {report.residual_routes / scale:>12.3e} {fd_rel:>12.3e} "
              f"{report.nakano_min_eig:>12.3e} {sff_min:>12.3e} {dt:>8.1f}")


if __name__ == "__main__":
    main()
