"""End-to-end acceptance suite.

Each test covers one numbered acceptance criterion at its stated
tolerance and emits a single pass/fail line (run with -s to see them on
success; pytest -v also reports one PASSED/FAILED line per criterion).
"""

import math
import time

import numpy as np
import pytest
import scipy.sparse
import scipy.sparse.linalg

from dslattice import classical as cl
from dslattice import dse_constant as dse
from dslattice import elliptic as el
from dslattice import lame_bloch as lb
from dslattice import mc
from dslattice.elliptic import EllipticModulus, SeriesKind
from dslattice.lattice import (LatticeSpec, ScalarField, action, eom_residual,
                               hat_p_squared, laplacian_apply, momentum_grid,
                               phat_squared_grid, plane_wave)
from dslattice.mc import MCConfig, jackknife


def _report(num, description, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] criterion {num}: {description}{suffix}", flush=True)
    assert ok, f"criterion {num} failed: {description}{suffix}"


def test_criterion_01_elliptic_identities():
    t0 = time.time()
    worst_id = 0.0
    worst_series = 0.0
    worst_cubed = 0.0
    for m in [0.1, 0.3, 0.5, 0.7, 0.9]:
        mod = EllipticModulus.from_m(m)
        sn_series = el.series_coeffs(SeriesKind.SN, mod, 32)
        for z in np.linspace(-2 * mod.K, 2 * mod.K, 64):
            s, c, d = el.jacobi_scd(z, m)
            worst_id = max(worst_id, abs(s * s + c * c - 1.0),
                           abs(d * d + m * s * s - 1.0))
            worst_series = max(worst_series, abs(sn_series.evaluate(z) - s))
            worst_cubed = max(worst_cubed, el.sn_cubed_identity_residual(z, mod))
    elapsed = time.time() - t0
    ok = worst_id <= 1e-12 and worst_series <= 1e-10 and worst_cubed <= 1e-9 and elapsed < 1.0
    _report(1, "elliptic identities, SN series, sn^3 identity",
            ok, f"id {worst_id:.1e}, series {worst_series:.1e}, "
                f"cubed {worst_cubed:.1e}, {elapsed:.2f}s")


def test_criterion_02_negative_modulus_branch():
    t0 = time.time()
    mod = EllipticModulus.from_m(-1.0)
    series = el.series_coeffs(SeriesKind.SN, mod, 48)
    worst = max(abs(series.evaluate(z) - el.jacobi_sn(z, -1.0))
                for z in np.linspace(-2 * mod.K, 2 * mod.K, 32))
    elapsed = time.time() - t0
    ok = worst <= 1e-9 and elapsed < 1.0
    _report(2, "k^2 = -1 alternating series vs mapped evaluation",
            ok, f"max gap {worst:.1e}, {elapsed:.2f}s")


def test_criterion_03_lattice_operator():
    t0 = time.time()
    sp = LatticeSpec(d=2, L=8, a=0.5)
    worst_eig = 0.0
    for _, p in momentum_grid(sp):
        wave = plane_wave(sp, p, phase=0.4)
        lhs = laplacian_apply(wave).values
        rhs = -hat_p_squared(p, sp) * wave.values
        worst_eig = max(worst_eig, float(np.max(np.abs(lhs - rhs))))
    # action gradient vs eom_residual by central FD
    rng = np.random.default_rng(2)
    f = ScalarField(sp, rng.standard_normal(sp.shape))
    m2, lam = 0.8, 1.6
    grad = sp.a ** sp.d * eom_residual(f, m2, lam).values
    eps = 1e-5
    worst_grad = 0.0
    for site in [(0, 0), (3, 5), (7, 2), (4, 4)]:
        fp, fm = f.copy(), f.copy()
        fp.values[site] += eps
        fm.values[site] -= eps
        fd = (action(fp, m2, lam) - action(fm, m2, lam)) / (2 * eps)
        worst_grad = max(worst_grad, abs(fd - grad[site]) / abs(grad[site]))
    elapsed = time.time() - t0
    ok = worst_eig <= 1e-12 and worst_grad <= 1e-7 and elapsed < 5.0
    _report(3, "plane-wave eigenrelation and action gradient",
            ok, f"eig {worst_eig:.1e}, grad {worst_grad:.1e}, {elapsed:.2f}s")


def test_criterion_04_sn_wave_convergence():
    t0 = time.time()
    mod = EllipticModulus.from_m(0.5)
    wave, m2 = cl.sn_wave_for_extent(mod, lam=1.0, extent=18.0)
    results = cl.sn_wave_eom_convergence(wave, m2, 1.0, [0.1, 0.05, 0.025])
    logs = np.log(np.asarray(results))
    slope = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    elapsed = time.time() - t0
    ok = 1.8 <= slope <= 2.2 and elapsed < 10.0
    _report(4, "classical sn-wave EOM residual is O(a^2)",
            ok, f"slope {slope:.4f}, {elapsed:.2f}s")


def test_criterion_05_functional_derivatives():
    t0 = time.time()
    sp = LatticeSpec(d=1, L=16, a=0.5)
    m2, lam = 1.0, 2.0
    x = np.arange(sp.L) * sp.a
    j = ScalarField(sp, 0.3 * np.sin(2 * math.pi * x / (sp.L * sp.a)) + 0.1)
    phi, _ = cl.newton_solve_eom(j, ScalarField.zeros(sp), m2, lam, tol=1e-14)

    def solve(jv):
        out, _ = cl.newton_solve_eom(ScalarField(sp, jv), phi.copy(), m2, lam,
                                     tol=1e-14)
        return out.values

    # first derivative
    m = 5
    eps1 = 1e-5 * (1.0 + float(np.max(np.abs(j.values))))
    jp = j.values.copy(); jp[m] += eps1
    jm = j.values.copy(); jm[m] -= eps1
    fd1 = (solve(jp) - solve(jm)) / (2 * eps1)
    col = cl.classical_propagator_column(phi, (m,), m2, lam)
    rel1 = float(np.max(np.abs(fd1 - col.values)) / np.max(np.abs(col.values)))

    # second derivative (larger step: second differences are
    # roundoff-limited near 1e-5 steps)
    msite, lsite = 3, 7
    eps2 = 1e-3

    def pert(sm, sl):
        jv = j.values.copy()
        jv[msite] += sm * eps2
        jv[lsite] += sl * eps2
        return solve(jv)

    fd2 = (pert(1, 1) - pert(1, -1) - pert(-1, 1) + pert(-1, -1)) / (4 * eps2 ** 2)
    d2 = cl.second_functional_derivative(phi, (msite,), (lsite,), m2, lam)
    rel2 = float(np.max(np.abs(fd2 - d2.values)) / np.max(np.abs(d2.values)))
    elapsed = time.time() - t0
    ok = rel1 <= 1e-6 and rel2 <= 1e-5 and elapsed < 30.0
    _report(5, "functional derivatives vs finite differences",
            ok, f"first {rel1:.1e}, second {rel2:.1e}, {elapsed:.2f}s")


def _sparse_operator(lattice, mu2):
    n = lattice.nsites
    idx = np.arange(n).reshape(lattice.shape)
    rows, cols, vals = [], [], []
    inv_a2 = 1.0 / lattice.a ** 2
    for site in np.ndindex(lattice.shape):
        i = idx[site]
        rows.append(i); cols.append(i)
        vals.append(2.0 * lattice.d * inv_a2 + mu2)
        for axis in range(lattice.d):
            for step in (1, -1):
                nb = list(site)
                nb[axis] = (nb[axis] + step) % lattice.L
                rows.append(i); cols.append(idx[tuple(nb)])
                vals.append(-inv_a2)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def test_criterion_06_gap_equation():
    t0 = time.time()
    # exact enumeration: d=1, L=2, a=1, m2=1/2 -> mu2 = 1, Gnn = 0.6
    free = dse.gap_solve(0.5, 0.0, LatticeSpec(1, 2, 1.0))
    exact = abs(free.Gnn - 0.6)

    worst_res = 0.0
    worst_parseval = 0.0
    for d in [1, 2, 3, 4]:
        lattice = LatticeSpec(d, 8, 1.0)
        sol = dse.gap_solve(0.3, 2.0, lattice)
        loop = float(np.mean(1.0 / (phat_squared_grid(lattice) + sol.mu2)))
        worst_res = max(worst_res, abs(loop - sol.Gnn))
        # Parseval: momentum-grid average equals the coincident-point value
        # of the position-space inverse operator
        M = _sparse_operator(lattice, sol.mu2).tocsc()
        e0 = np.zeros(lattice.nsites)
        e0[0] = 1.0
        col = scipy.sparse.linalg.spsolve(M, e0)
        worst_parseval = max(worst_parseval, abs(col[0] - sol.Gnn))
    elapsed = time.time() - t0
    ok = (exact <= 1e-15 and worst_res <= 1e-12 and worst_parseval <= 1e-12
          and elapsed < 60.0)
    _report(6, "gap-equation fixed point and Parseval consistency",
            ok, f"enum {exact:.1e}, residual {worst_res:.1e}, "
                f"parseval {worst_parseval:.1e}, {elapsed:.2f}s")


def test_criterion_07_cumulant_structure():
    t0 = time.time()
    lattice = LatticeSpec(2, 8, 1.0)
    sol = dse.gap_solve(0.4, 1.5, lattice)
    phi = 0.8
    worst_sym = 0.0
    base = 2 * math.pi / 8
    rng = np.random.default_rng(4)
    for _ in range(40):
        kp = rng.integers(0, 8, size=2)
        kq = rng.integers(0, 8, size=2)
        p, q = base * kp, base * kq
        c = dse.c3_momentum(p, q, phi, sol)
        for other in (dse.c3_momentum(q, p, phi, sol),
                      dse.c3_momentum(p, -p - q, phi, sol),
                      dse.c3_momentum(-p - q, q, phi, sol)):
            worst_sym = max(worst_sym, abs(other - c) / abs(c))
    zero_at_phi0 = dse.c3_coincident(0.0, sol)
    res = dse.c3_equation_residual_grid(phi, sol)
    worst_eq = float(np.max(np.abs(res)))
    elapsed = time.time() - t0
    ok = (worst_sym <= 1e-12 and zero_at_phi0 == 0.0 and worst_eq <= 1e-12
          and elapsed < 30.0)
    _report(7, "C3 permutation symmetry, phi=0 limit, closed-form residual",
            ok, f"sym {worst_sym:.1e}, eq {worst_eq:.1e}, {elapsed:.2f}s")


def test_criterion_08_lame_bloch():
    t0 = time.time()
    mod = EllipticModulus.from_m(0.5)
    sys = lb.build_bloch_system(1.0, 1.2, [0.4], mod, 0.3, 0.0, R=40)
    worst_resum = max(lb.potential_resummation_check(sys, ell, a=0.25)[2]
                      for ell in range(-20, 21))

    lattice = LatticeSpec(1, 64, 0.25)
    p = np.array([0.3])
    N1 = lb.BAND_FACTOR * sys.R
    g1 = lb.bloch_solve(p, sys, lattice, N=N1)
    g2 = lb.bloch_solve(p, sys, lattice, N=2 * N1)
    band_delta = abs(g1[N1] - g2[2 * N1])

    masses = np.array([0.5, 1.3, 2.7])
    weights = np.array([0.2, 0.5, 0.3])
    ph2 = np.linspace(0.1, 12.0, 25)
    y = (weights[None, :] / (ph2[:, None] + masses[None, :])).sum(axis=1)
    dec = lb.spectral_fit(list(zip(ph2, y)), masses)
    fit_err = float(np.max(np.abs(dec.weights - weights)))
    elapsed = time.time() - t0
    ok = (worst_resum <= 1e-10 and band_delta < 1e-8 and fit_err <= 1e-8
          and dec.normalization_defect <= 1e-10 and elapsed < 60.0)
    _report(8, "resummation identity, band doubling, synthetic KL recovery",
            ok, f"resum {worst_resum:.1e}, band {band_delta:.1e}, "
                f"fit {fit_err:.1e}, defect {dec.normalization_defect:.1e}, "
                f"{elapsed:.2f}s")


def test_criterion_09_appendix_modes():
    t0 = time.time()
    mod = EllipticModulus.from_m(0.5)
    lam, extent = 1.0, 18.0
    p = 4 * mod.K / extent
    b = math.sqrt(12 * 0.5 * p * p / lam)
    ratios = {}
    for kind in ["CN_DN", "SN_DN"]:
        M2 = lb.lame_mode_mass(kind, lam, b, mod)
        norms = []
        for a in [0.1, 0.05, 0.025]:
            L = int(round(extent / a))
            lattice = LatticeSpec(1, L, extent / L)
            res = lb.lame_homogeneous_residual(kind, b, [p], 0.0, mod, M2, lam,
                                               lattice)
            norms.append(float(np.max(np.abs(res.values))))
        ratios[kind] = [norms[0] / norms[1], norms[1] / norms[2]]
    elapsed = time.time() - t0
    ok = all(3.3 <= r <= 4.7 for rs in ratios.values() for r in rs) and elapsed < 30.0
    detail = ", ".join(f"{k} {rs[0]:.2f}/{rs[1]:.2f}" for k, rs in ratios.items())
    ok_detail = f"{detail}, {elapsed:.2f}s"
    _report(9, "cn.dn and sn.dn residuals shrink ~4x per halved spacing",
            ok, ok_detail)


def test_criterion_10_mc_validation():
    t0 = time.time()
    # free theory vs closed-form propagator
    sp = LatticeSpec(1, 8, 1.0)
    cfg = MCConfig(sp, 1.0, 0.0, sweeps=100000, thermalization=5000, seed=12345)
    res = mc.metropolis_run(cfg)
    ref = mc.free_propagator(sp, 1.0)
    max_z = max(abs(meas.z_score(float(ref[idx]))) for idx, meas in res.propagator_p)

    # single-site moments vs quadrature
    phi_grid = np.linspace(-8.0, 8.0, 20001)
    w = np.exp(-(0.5 * 1.0 * phi_grid ** 2 + 3.0 / 24.0 * phi_grid ** 4))
    zq = np.trapezoid(w, phi_grid)
    ex2 = np.trapezoid(phi_grid ** 2 * w, phi_grid) / zq
    ex4 = np.trapezoid(phi_grid ** 4 * w, phi_grid) / zq
    site_cfg = MCConfig(LatticeSpec(1, 1, 1.0), 1.0, 3.0, sweeps=300000,
                        thermalization=5000, seed=77)
    site = mc.metropolis_run(site_cfg, keep_series=True, measure_propagator=False)
    phi = site.series["magnetization"]
    z2 = abs(jackknife(phi ** 2).z_score(ex2))
    z4 = abs(jackknife(phi ** 4).z_score(ex4))
    elapsed = time.time() - t0
    ok = max_z < 3.0 and z2 < 3.0 and z4 < 3.0 and elapsed < 300.0
    _report(10, "MC propagator and moments within 3 sigma of oracles",
            ok, f"free max|z| {max_z:.2f}, site |z| {z2:.2f}/{z4:.2f}, "
                f"{elapsed:.1f}s")


def test_criterion_11_triviality_diagnostic():
    t0 = time.time()
    scans = {}
    for d, m2, sweeps, therm, seed0 in [(4, 0.0, 100000, 5000, 2024),
                                        (2, -0.6, 12000, 2000, 999)]:
        values = []
        errors = []
        for L in [4, 6, 8]:
            cfg = MCConfig(LatticeSpec(d, L, 1.0), m2, 1.0, sweeps=sweeps,
                           thermalization=therm, seed=seed0 + L)
            r = mc.metropolis_run(cfg, measure_propagator=False)
            values.append(r.binder_U.value)
            errors.append(r.binder_U.error)
        scans[d] = (values, errors)
    v4, e4 = scans[4]
    v2, _ = scans[2]
    decreasing_d4 = v4[0] > v4[1] > v4[2]
    # 3-sigma-compatible ordering: each decrease not contradicted at 3 sigma
    compatible = all(v4[i] - v4[i + 1] > -3.0 * math.hypot(e4[i], e4[i + 1])
                     for i in range(2))
    not_decreasing_d2 = not (v2[0] > v2[1] > v2[2])
    elapsed = time.time() - t0
    ok = decreasing_d4 and compatible and not_decreasing_d2 and elapsed < 1800.0
    _report(11, "Binder U decreases with L at d=4 but not at d=2",
            ok, f"d4 {v4[0]:.3f}>{v4[1]:.3f}>{v4[2]:.3f}, "
                f"d2 {v2[0]:.3f},{v2[1]:.3f},{v2[2]:.3f}, {elapsed:.1f}s")
