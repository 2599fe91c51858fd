"""Command-line front end: run experiments, emit JSON/CSV reports.

Exit codes: 0 pass, 1 tolerance failure, 2 config error, 3 numerical failure.
Reports are deterministic for a fixed config and seed, except for the
"timestamp" field.
"""

from __future__ import annotations

import datetime
import json
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import bls as blsmod
from .config import ExperimentConfig, config_from_dict, load_config
from .curvature import curvature_H, curvature_commutator
from .errors import (
    ConfigInvalid,
    NotClosed,
    NotCoexact,
    SingularBlock,
    TorusLabError,
)
from .family import (
    kappa,
    primitive_lift,
    primitivity_residual,
    trivialization_lift,
)
from .forms import (
    Grid,
    Spectral,
    assemble_dbar,
    assemble_nabla10,
    curvature_action,
    lefschetz_L,
    lefschetz_Lambda,
    make_space,
    pair_l2,
)
from .geometry import catalog_family
from .hodge import build_hodge, minimal_solution
from .oracle import exact_flat_spectrum, is_jump_point, rank_scan, write_rank_scan_csv
from .curvature import wedge_pair


# ---------------------------------------------------------------------------
# plumbing


def _c(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def _cmat(m) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[_c(z) for z in row] for row in m]


def _family(cfg: ExperimentConfig):
    if cfg.family == "elliptic":
        if cfg.d >= 1:
            return catalog_family("elliptic", cfg.t, d=cfg.d, tau=cfg.tau)
        chi = cfg.chi if cfg.chi else (0.0, 0.0)
        return catalog_family("elliptic", cfg.t, d=0, chi=chi, tau=cfg.tau)
    if cfg.family == "jumping":
        return catalog_family("jumping", cfg.t, tau=cfg.tau)
    chi = cfg.chi if cfg.chi else (0.0, 0.0, 0.0, 0.0)
    return catalog_family("siegel-diagonal", cfg.t, chi=chi, tau=cfg.tau)


def _disc(cfg: ExperimentConfig, n: int):
    if cfg.backend == "spectral":
        return Spectral(M=cfg.M)
    if n != 1:
        raise ConfigInvalid("the grid backend supports one-dimensional fibers only")
    return Grid(N=cfg.N, order=cfg.order)


def _expected_h0(cfg: ExperimentConfig, fam) -> int:
    torus = fam.torus_at()
    bundle = fam.bundle_at()
    if not bundle.is_flat:
        return cfg.d ** torus.n
    lam = exact_flat_spectrum(torus, bundle.chi, (torus.n, 0), M=2)
    return int(np.count_nonzero(lam < 1e-9))


def _band_limited(space, rng, nmodes: int = 6):
    """A smooth random section: a few low Fourier modes in the stored gauge."""
    calc = space.calculus
    coeffs = np.zeros((space.ncomp,) + space.field_shape, dtype=complex)
    if isinstance(space.disc, Spectral):
        coeffs = rng.standard_normal(coeffs.shape) + 1j * rng.standard_normal(coeffs.shape)
    else:
        for ci in range(space.ncomp):
            for _ in range(nmodes):
                kx, ky = rng.integers(-2, 3, size=2)
                c = rng.standard_normal() + 1j * rng.standard_normal()
                coeffs[ci] += c * np.exp(2j * np.pi * (kx * calc.x + ky * calc.y))
    u = space.section(coeffs)
    nu = u.norm()
    return u * (1.0 / nu) if nu > 0 else u


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _emit(report: dict, out):
    report = dict(report)
    report["timestamp"] = _timestamp()
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _dump_spectrum_csv(packages: dict, path: str) -> None:
    """CSV with one row per eigenvalue: bidegree, index, eigenvalue."""
    with open(path, "w") as fh:
        fh.write("bidegree,index,eigenvalue\n")
        for bidegree in sorted(packages):
            pkg = packages[bidegree]
            for idx, lam in enumerate(pkg.eigenvalues()):
                fh.write(f"({bidegree[0]} {bidegree[1]}),{idx},{lam:.16e}\n")


def _common(func):
    func = click.option("--config", "config_path", type=click.Path(), default=None,
                        help="JSON experiment config.")(func)
    func = click.option("--out", type=click.Path(), default=None,
                        help="Report output path (stdout if omitted).")(func)
    func = click.option("--seed", type=int, default=None, help="Override config seed.")(func)
    func = click.option("--threads", type=int, default=None,
                        help="Worker threads for scans.")(func)
    func = click.option("--dump-spectrum", is_flag=True, default=False,
                        help="Also write Laplacian spectra as CSV next to --out.")(func)
    return func


def _load(config_path, seed, threads, defaults: dict) -> ExperimentConfig:
    if config_path is None:
        cfg = config_from_dict(defaults)
    else:
        cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if threads is not None:
        cfg.threads = threads
    return cfg


def _finish(ctx, code: int):
    ctx.exit(code)


@click.group()
def main():
    """Numerical laboratory for direct-image Hilbert fields over torus families."""


# ---------------------------------------------------------------------------
# hodge-check


def _identity_suite(cfg: ExperimentConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    fam = _family(cfg)
    torus, bundle = fam.torus_at(), fam.bundle_at()
    n = torus.n
    disc = _disc(cfg, n)
    cache = {}

    def space(p, q):
        if (p, q) not in cache:
            cache[(p, q)] = make_space(torus, bundle, (p, q), disc)
        return cache[(p, q)]

    res = {}

    # square of the (0,1)-differential across all composable bidegrees
    vals = [0.0]
    for p in range(n + 1):
        for q in range(n - 1):
            u = _band_limited(space(p, q), rng)
            vals.append(assemble_dbar(space(p, q + 1)).apply(
                assemble_dbar(space(p, q)).apply(u)).norm())
    res["dbar_squared"] = float(max(vals))

    # anticommutator of the two differentials equals wedging with the curvature
    u = _band_limited(space(0, 0), rng)
    anti = (assemble_nabla10(space(0, 1)).apply(assemble_dbar(space(0, 0)).apply(u))
            + assemble_dbar(space(1, 0)).apply(assemble_nabla10(space(0, 0)).apply(u)))
    res["chern_anticommutator"] = float((anti - curvature_action(space(0, 0)).apply(u)).norm())

    # Lefschetz commutator [L, Lambda] = (p+q-n) Id on every bidegree
    vals = [0.0]
    for p in range(n + 1):
        for q in range(n + 1):
            sp = space(p, q)
            u = _band_limited(sp, rng)
            acc = ((p + q - n) * -1.0) * u
            if p + 1 <= n and q + 1 <= n:
                up = space(p + 1, q + 1)
                acc = acc - lefschetz_Lambda(up).apply(lefschetz_L(sp).apply(u))
            if p >= 1 and q >= 1:
                down = space(p - 1, q - 1)
                acc = acc + lefschetz_L(down).apply(lefschetz_Lambda(sp).apply(u))
            vals.append(acc.norm())
    res["l_lambda_commutator"] = float(max(vals))

    # curvature-commutator form of the Laplacian comparison on (n,1)
    pkg_n1 = build_hodge(space(n, 1), rank_tol=cfg.tol("rank_tol"),
                         expected_kernel=_expected_kernel_nq(cfg, torus, bundle, (n, 1)))
    u = _band_limited(space(n, 1), rng)
    bk = (pkg_n1.laplacian.apply(u) - pkg_n1.laplacian10.apply(u)
          - curvature_commutator(space(n, 1)).apply(u))
    res["bochner_kodaira"] = float(bk.norm())

    # Hodge decomposition Id = harmonic projection + box Green
    u = _band_limited(space(n, 1), rng)
    hd = u - pkg_n1.harmonic_project(u) - pkg_n1.laplacian.apply(pkg_n1.green(u))
    res["hodge_decomposition"] = float(hd.norm())

    # minimal solution: ||u0||^2 = <G alpha, alpha>
    v = _band_limited(space(n, 0), rng)
    alpha = assemble_dbar(space(n, 0)).apply(v)
    if alpha.norm() > 0:
        try:
            u0 = minimal_solution(pkg_n1, alpha)
            lhs = u0.norm() ** 2
            rhs = pair_l2(pkg_n1.green(alpha), alpha).real
            res["minimal_solution_norm"] = float(abs(lhs - rhs) / max(abs(rhs), 1e-300))
        except (NotCoexact, NotClosed):
            # under-resolved differential: report the spurious harmonic fraction
            res["minimal_solution_norm"] = float(
                pkg_n1.harmonic_project(alpha).norm() / alpha.norm() + 1.0)
    else:
        res["minimal_solution_norm"] = 0.0

    return res, {(n, 1): pkg_n1}


def _expected_kernel_nq(cfg, torus, bundle, bidegree) -> int:
    if not bundle.is_flat:
        return cfg.d ** torus.n if bidegree[1] == 0 else 0
    lam = exact_flat_spectrum(torus, bundle.chi, bidegree, M=2)
    return int(np.count_nonzero(lam < 1e-9))


@main.command("hodge-check")
@_common
@click.pass_context
def cmd_hodge_check(ctx, config_path, out, seed, threads, dump_spectrum):
    """Run the operator-identity and Hodge-decomposition suite."""
    try:
        cfg = _load(config_path, seed, threads, {"backend": "spectral", "d": 0})
        residuals, packages = _identity_suite(cfg)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        return _finish(ctx, 2)
    except TorusLabError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return _finish(ctx, 3)

    tol_of = {
        "dbar_squared": "identity",
        "chern_anticommutator": "identity",
        "l_lambda_commutator": "identity",
        "bochner_kodaira": "identity",
        "hodge_decomposition": "hodge_decomposition",
        "minimal_solution_norm": "minimal_solution",
    }
    failures = sorted(k for k, v in residuals.items() if v > cfg.tol(tol_of[k]))
    report = {
        "command": "hodge-check",
        "config": cfg.as_dict(),
        "residuals": residuals,
        "failures": failures,
        "status": "pass" if not failures else "fail",
    }
    _emit(report, out)
    if dump_spectrum and out:
        _dump_spectrum_csv(packages, out + ".spectrum.csv")
    return _finish(ctx, 0 if not failures else 1)


# ---------------------------------------------------------------------------
# curvature


@main.command("curvature")
@_common
@click.pass_context
def cmd_curvature(ctx, config_path, out, seed, threads, dump_spectrum):
    """Curvature of the direct-image field: both routes plus positivity verdict."""
    try:
        cfg = _load(config_path, seed, threads, {})
        fam = _family(cfg)
        torus, bundle = fam.torus_at(), fam.bundle_at()
        n = torus.n
        disc = _disc(cfg, n)
        sp = make_space(torus, bundle, (n, 0), disc)
        pkg0 = build_hodge(sp, rank_tol=cfg.tol("rank_tol"),
                           expected_kernel=_expected_h0(cfg, fam))
        basis = [f * (1.0 / f.norm()) for f in pkg0.harmonic_basis]
        lift = trivialization_lift(fam, sp)
        rep = curvature_H(fam, lift, basis, pkg0,
                          admissibility_tol=cfg.tol("admissibility"))
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        return _finish(ctx, 2)
    except TorusLabError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return _finish(ctx, 3)

    failures = []
    positive_bundle = not bundle.is_flat
    if rep.rank > 0:
        scale = max(float(np.linalg.norm(rep.theta_H)), 1e-300)
        if rep.residual_routes / scale > cfg.tol("routes_rel"):
            failures.append("routes_rel")
        if positive_bundle and rep.nakano_min_eig < -cfg.tol("nakano"):
            failures.append("nakano")
        if np.linalg.eigvalsh(rep.term_sff).min() < -cfg.tol("sff_psd"):
            failures.append("sff_psd")

    report = {
        "command": "curvature",
        "config": cfg.as_dict(),
        "rank": rep.rank,
        "at_jump_locus": bool(cfg.family == "jumping" and is_jump_point(cfg.t)),
        "gram": _cmat(rep.gram),
        "term_theta_h": _cmat(rep.term_theta_h),
        "term_kappa": _cmat(rep.term_kappa),
        "term_sff": _cmat(rep.term_sff),
        "theta_H": _cmat(rep.theta_H),
        "theta_H_pushforward": _cmat(rep.theta_H_bly),
        "residual_routes": float(rep.residual_routes),
        "hermiticity_defect": float(rep.hermiticity_defect()),
        "nakano_min_eig": float(rep.nakano_min_eig),
        "positivity_verdict": bool(rep.rank == 0 or not positive_bundle
                                   or rep.nakano_min_eig >= -cfg.tol("nakano")),
        "failures": sorted(failures),
        "status": "pass" if not failures else "fail",
    }
    _emit(report, out)
    if dump_spectrum and out:
        _dump_spectrum_csv({(n, 0): pkg0}, out + ".spectrum.csv")
    return _finish(ctx, 0 if not failures else 1)


# ---------------------------------------------------------------------------
# scan-rank


@main.command("scan-rank")
@_common
@click.pass_context
def cmd_scan_rank(ctx, config_path, out, seed, threads, dump_spectrum):
    """Scan fiberwise holomorphic-section counts along a base segment (CSV)."""
    try:
        cfg = _load(config_path, seed, threads, {"family": "jumping", "t": [0.0, 1.0]})
        fam = _family(cfg)
        samples = cfg.scan_samples()
        if cfg.threads > 1:
            chunks = np.array_split(np.asarray(samples, dtype=complex), cfg.threads)
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                parts = list(pool.map(lambda ch: rank_scan(fam, list(ch), M=cfg.M),
                                      chunks))
            rows = [row for part in parts for row in part]
        else:
            rows = rank_scan(fam, samples, M=cfg.M)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        return _finish(ctx, 2)
    except TorusLabError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return _finish(ctx, 3)

    path = out if out else "rank_scan.csv"
    write_rank_scan_csv(rows, path)
    click.echo(f"wrote {len(rows)} rows to {path}")
    return _finish(ctx, 0)


# ---------------------------------------------------------------------------
# primitive-lift


@main.command("primitive-lift")
@_common
@click.pass_context
def cmd_primitive_lift(ctx, config_path, out, seed, threads, dump_spectrum):
    """Construct the primitive horizontal lift and verify its two properties."""
    try:
        cfg = _load(config_path, seed, threads,
                    {"family": "siegel-diagonal", "t": [0.2, 0.9],
                     "backend": "spectral", "d": 0})
        fam = _family(cfg)
        torus, bundle = fam.torus_at(), fam.bundle_at()
        n = torus.n
        disc = _disc(cfg, n)
        sp = make_space(torus, bundle, (n, 0), disc)
        pkg0 = build_hodge(sp, rank_tol=cfg.tol("rank_tol"),
                           expected_kernel=_expected_h0(cfg, fam))
        basis = [f * (1.0 / f.norm()) for f in pkg0.harmonic_basis]
        base = trivialization_lift(fam, sp)
        if n >= 2:
            sp02 = make_space(torus, bundle, (0, 2), disc)
            pkg02 = build_hodge(sp02, rank_tol=cfg.tol("rank_tol"),
                                expected_kernel=_expected_kernel_nq(cfg, torus, bundle, (0, 2)))
            lifted = primitive_lift(fam, base, pkg02)
        else:
            lifted = primitive_lift(fam, base)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        return _finish(ctx, 2)
    except TorusLabError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return _finish(ctx, 3)

    prim_res = max([0.0] + [primitivity_residual(lifted, f) for f in basis])
    hr_res = 0.0
    for f in basis:
        kf = kappa(lifted, f)
        hr_res = max(hr_res, abs(wedge_pair(kf, kf) + pair_l2(kf, kf)))

    failures = []
    if prim_res > cfg.tol("primitivity"):
        failures.append("primitivity")
    if hr_res > cfg.tol("hr_equality"):
        failures.append("hr_equality")

    report = {
        "command": "primitive-lift",
        "config": cfg.as_dict(),
        "rank": len(basis),
        "unchanged": bool(n == 1),
        "primitivity_residual": float(prim_res),
        "hr_equality_residual": float(hr_res),
        "failures": sorted(failures),
        "status": "pass" if not failures else "fail",
    }
    _emit(report, out)
    return _finish(ctx, 0 if not failures else 1)


# ---------------------------------------------------------------------------
# bls battery


def random_demailly_instance(seed: int):
    """A seeded random Hermitian-form instance with oracle-checkable dims.

    Returns (form, k, S) with S the Schur complement; dims satisfy m·r <= 9 and
    the rank-k oracle applies (k = 1 with m1 <= 2, or k >= min(m1, r)).
    """
    rng = np.random.default_rng(seed)
    while True:
        m = int(rng.integers(2, 4))
        r = int(rng.integers(1, 9 // m + 1))
        m1 = int(rng.integers(1, m))
        m2 = m - m1
        dim = m * r
        A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        phi = (A + A.conj().T) / 2.0
        if rng.random() < 0.5:
            phi = A.conj().T @ A + 0.2 * np.eye(dim)
        else:
            phi = phi + (0.5 + float(np.abs(np.linalg.eigvalsh(phi)).max())
                         * float(rng.random())) * np.eye(dim)
        form = blsmod.HermitianFormOnTensor(m=m, r=r, phi=phi, split=(m1, m2))
        try:
            S = blsmod.schur_complement(form)
        except SingularBlock:
            continue
        if m1 <= 2:
            k = int(rng.integers(1, min(m1, r) + 1))
        else:
            k = min(m1, r)
        return form, k, S


def bls_battery(cfg: ExperimentConfig) -> dict:
    step = float(cfg.bls.get("step", cfg.step))
    t0 = cfg.bls.get("t", 0.3 + 0.2j)
    instances = int(cfg.bls.get("instances", 100))
    out = {"step": step, "t": _c(t0), "instances": instances, "seed": cfg.seed}

    # curvature closed forms
    f_flat = blsmod.FiniteBLSField(2, lambda t: np.eye(2, dtype=complex))
    out["curvature_identity_residual"] = float(
        np.linalg.norm(blsmod.chern_curvature_fd(f_flat, t0, step)))
    f_exp = blsmod.FiniteBLSField(
        2, lambda t: np.exp(abs(t) ** 2) * np.eye(2, dtype=complex))
    out["curvature_exp_residual"] = float(
        np.linalg.norm(blsmod.chern_curvature_fd(f_exp, t0, step) + np.eye(2)))

    # Gauss-Griffiths on a rotating holomorphically-spanned subfield
    def rotating(t):
        v = np.array([np.cos(0.8 * t), np.sin(0.8 * t)], dtype=complex)
        return np.outer(v, v.conj()) / np.vdot(v, v)

    f_rot = blsmod.FiniteBLSField(
        2, lambda t: np.exp(abs(t) ** 2) * np.eye(2, dtype=complex), rotating)
    out["gauss_griffiths_residual"] = float(
        blsmod.gauss_griffiths_check(f_rot, t0, step))
    out["gauss_griffiths_bound"] = 10.0 * step ** 2

    # catalog Griffiths-positive, Nakano-indefinite form
    v0 = np.zeros(4, dtype=complex)
    v0[1] = 1.0 / np.sqrt(2.0)
    v0[2] = -1.0 / np.sqrt(2.0)
    phi_gn = np.eye(4, dtype=complex) - 1.5 * np.outer(v0, v0.conj())
    form_gn = blsmod.HermitianFormOnTensor(m=2, r=2, phi=phi_gn, split=(2, 0))
    gn1, _ = blsmod.schur_complement_demailly(form_gn, 1, seed=cfg.seed)
    gn2, _ = blsmod.schur_complement_demailly(form_gn, 2, seed=cfg.seed)
    out["griffiths_not_nakano"] = {"one_positive": bool(gn1), "two_positive": bool(gn2)}

    # seeded random battery against the brute-force oracle
    disagreements = []
    monotonicity_violations = []
    rows = []
    for i in range(instances):
        seed = cfg.seed * 100003 + i
        form, k, S = random_demailly_instance(seed)
        m1 = form.split[0]
        verdicts = {}
        for kk in range(1, k + 1):
            pos, _ = blsmod.schur_complement_demailly(form, kk, seed=seed)
            val, _ = blsmod._als_min(S, m1, form.r, kk, restarts=50, iters=40,
                                     rng=np.random.default_rng(seed + 7))
            oracle = blsmod.rank_k_min_oracle(S, m1, form.r, kk)
            agree = bool(abs(val - oracle) <= 1e-6 * max(1.0, abs(oracle))
                         and pos == (oracle > -1e-9))
            verdicts[kk] = pos
            if not agree:
                disagreements.append({"seed": seed, "k": kk,
                                      "als": float(val), "oracle": float(oracle)})
            rows.append({"seed": seed, "m": form.m, "r": form.r,
                         "split": list(form.split), "k": kk,
                         "als_min": float(val), "oracle_min": float(oracle),
                         "k_positive": bool(pos), "agree": agree})
        for kk in range(2, k + 1):
            if verdicts[kk] and not verdicts[kk - 1]:
                monotonicity_violations.append({"seed": seed, "k": kk})
    out["instances_checked"] = rows
    out["disagreements"] = disagreements
    out["monotonicity_violations"] = monotonicity_violations
    return out


@main.command("bls")
@_common
@click.pass_context
def cmd_bls(ctx, config_path, out, seed, threads, dump_spectrum):
    """Finite-dimensional matrix-field battery with a brute-force oracle."""
    try:
        cfg = _load(config_path, seed, threads, {})
        battery = bls_battery(cfg)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        return _finish(ctx, 2)
    except TorusLabError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return _finish(ctx, 3)

    failures = []
    if battery["curvature_identity_residual"] > 10.0 * battery["step"] ** 2:
        failures.append("curvature_identity")
    if battery["curvature_exp_residual"] > 2.0 * battery["step"] ** 2:
        failures.append("curvature_exp")
    if battery["gauss_griffiths_residual"] > battery["gauss_griffiths_bound"]:
        failures.append("gauss_griffiths")
    gn = battery["griffiths_not_nakano"]
    if not (gn["one_positive"] and not gn["two_positive"]):
        failures.append("griffiths_not_nakano")
    if battery["disagreements"]:
        failures.append("oracle_disagreement")
    if battery["monotonicity_violations"]:
        failures.append("monotonicity")

    report = {
        "command": "bls",
        "config": cfg.as_dict(),
        "battery": battery,
        "failures": sorted(failures),
        "status": "pass" if not failures else "fail",
    }
    _emit(report, out)
    return _finish(ctx, 0 if not failures else 1)


# ---------------------------------------------------------------------------
# report aggregation


@main.command("report")
@click.argument("paths", nargs=-1, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def cmd_report(ctx, paths, out):
    """Aggregate previously written JSON reports into one summary."""
    entries = []
    worst = "pass"
    for path in paths:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"config error: cannot read {path}: {exc}", err=True)
            return _finish(ctx, 2)
        status = data.get("status", "unknown")
        if status != "pass":
            worst = "fail"
        entries.append({
            "path": str(path),
            "command": data.get("command", "unknown"),
            "status": status,
            "failures": data.get("failures", []),
        })
    summary = {
        "command": "report",
        "reports": entries,
        "status": worst if entries else "pass",
    }
    _emit(summary, out)
    return _finish(ctx, 0 if worst == "pass" else 1)


if __name__ == "__main__":
    main()
