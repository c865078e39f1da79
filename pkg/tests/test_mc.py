import math

import numpy as np
import pytest

from dslattice import mc
from dslattice.lattice import LatticeSpec
from dslattice.mc import MCConfig, jackknife, binder_cumulant


def single_site_moments(m2, lam, a=1.0, half_width=8.0, n=20001):
    """<phi^2>, <phi^4> for one site by trapezoidal quadrature."""
    phi = np.linspace(-half_width, half_width, n)
    w = np.exp(-a * (0.5 * m2 * phi ** 2 + lam / 24.0 * phi ** 4))
    z = np.trapezoid(w, phi)
    m2nd = np.trapezoid(phi ** 2 * w, phi) / z
    m4th = np.trapezoid(phi ** 4 * w, phi) / z
    return m2nd, m4th


def two_site_moments(m2, lam, half_width=6.0, n=801):
    """<phi0^2> and <phi0 phi1> on the 2-site chain by 2D quadrature."""
    phi = np.linspace(-half_width, half_width, n)
    p0, p1 = np.meshgrid(phi, phi, indexing="ij")
    S = ((p0 - p1) ** 2 + 0.5 * m2 * (p0 ** 2 + p1 ** 2)
         + lam / 24.0 * (p0 ** 4 + p1 ** 4))
    w = np.exp(-S)
    z = np.trapezoid(np.trapezoid(w, phi, axis=1), phi)
    m_sq = np.trapezoid(np.trapezoid(p0 ** 2 * w, phi, axis=1), phi) / z
    m_cross = np.trapezoid(np.trapezoid(p0 * p1 * w, phi, axis=1), phi) / z
    return m_sq, m_cross


class TestJackknife:
    def test_mean_and_error_iid(self):
        rng = np.random.default_rng(101)
        x = rng.standard_normal(20000)
        meas = jackknife(x)
        assert meas.value == pytest.approx(np.mean(x), abs=1e-12)
        # iid: jackknife error approximates sigma/sqrt(n)
        assert meas.error == pytest.approx(1.0 / math.sqrt(len(x)), rel=0.25)

    def test_nonlinear_estimator(self):
        x = np.arange(40, dtype=float)
        meas = jackknife(x, estimator=lambda v: float(np.mean(v ** 2)))
        assert meas.value == pytest.approx(np.mean(x ** 2))
        assert meas.error > 0

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            jackknife(np.arange(5.0), n_blocks=20)


class TestBinder:
    def test_gaussian_near_zero(self):
        rng = np.random.default_rng(55)
        x = rng.standard_normal(200000)
        meas = binder_cumulant(x)
        assert abs(meas.value) < 4 * meas.error
        assert abs(meas.value) < 0.02

    def test_two_delta_limit(self):
        # M = +-1 gives <M^4> = <M^2> = 1, U = 2/3
        x = np.tile([1.0, -1.0], 5000)
        meas = binder_cumulant(x)
        assert meas.value == pytest.approx(2.0 / 3.0, abs=1e-12)


class TestConfig:
    def test_validation(self):
        sp = LatticeSpec(1, 4, 1.0)
        with pytest.raises(ValueError):
            MCConfig(sp, 1.0, 0.0, sweeps=10, thermalization=10)
        with pytest.raises(ValueError):
            MCConfig(sp, 1.0, 0.0, sweeps=10, thermalization=0, proposal_width=0.0)


class TestMetropolis:
    def test_deterministic_for_fixed_seed(self):
        sp = LatticeSpec(1, 4, 1.0)
        cfg = MCConfig(sp, 1.0, 1.0, sweeps=500, thermalization=100, seed=9)
        r1 = mc.metropolis_run(cfg, keep_series=True)
        r2 = mc.metropolis_run(cfg, keep_series=True)
        assert np.array_equal(r1.series["magnetization"], r2.series["magnetization"])
        assert r1.acceptance_rate == r2.acceptance_rate

    def test_seeds_decorrelate(self):
        sp = LatticeSpec(1, 4, 1.0)
        a = mc.metropolis_run(MCConfig(sp, 1.0, 1.0, 500, 100, seed=1), keep_series=True)
        b = mc.metropolis_run(MCConfig(sp, 1.0, 1.0, 500, 100, seed=2), keep_series=True)
        assert not np.array_equal(a.series["magnetization"], b.series["magnetization"])

    def test_acceptance_warning_flag(self):
        sp = LatticeSpec(1, 4, 1.0)
        # absurdly wide proposals with no tuning phase: acceptance collapses
        cfg = MCConfig(sp, 1.0, 0.0, sweeps=400, thermalization=0,
                       proposal_width=500.0, seed=3)
        res = mc.metropolis_run(cfg, measure_propagator=False)
        assert res.acceptance_rate < 0.2
        assert res.acceptance_warning

    def test_free_propagator_rough_agreement(self):
        sp = LatticeSpec(1, 4, 1.0)
        cfg = MCConfig(sp, 2.0, 0.0, sweeps=30000, thermalization=2000, seed=17)
        res = mc.metropolis_run(cfg)
        ref = mc.free_propagator(sp, 2.0)
        for idx, meas in res.propagator_p:
            assert abs(meas.z_score(float(ref[idx]))) < 4.0

    def test_single_site_moments_vs_quadrature(self):
        sp = LatticeSpec(1, 1, 1.0)
        cfg = MCConfig(sp, 1.0, 3.0, sweeps=120000, thermalization=5000, seed=41)
        res = mc.metropolis_run(cfg, keep_series=True, measure_propagator=False)
        phi = res.series["magnetization"]
        ex2, ex4 = single_site_moments(1.0, 3.0)
        m2_meas = jackknife(phi ** 2)
        m4_meas = jackknife(phi ** 4)
        assert abs(m2_meas.z_score(ex2)) < 4.0
        assert abs(m4_meas.z_score(ex4)) < 4.0

    def test_two_site_moments_vs_quadrature(self):
        # exercises the exact local action difference (detailed balance)
        sp = LatticeSpec(1, 2, 1.0)
        m2, lam = 1.0, 2.0
        cfg = MCConfig(sp, m2, lam, sweeps=120000, thermalization=5000, seed=29)
        res = mc.metropolis_run(cfg, keep_series=True)
        ex_sq, ex_cross = two_site_moments(m2, lam)
        # |phi(0)|^2/2 and |phi(pi)|^2/2 combine into phi_n^2 and phi0 phi1
        g0 = next(m for i, m in res.propagator_p if i == (0,))
        g1 = next(m for i, m in res.propagator_p if i == (1,))
        sq = jackknife(0.5 * (res.series["propagator"][:, 0]
                              + res.series["propagator"][:, 1]))
        cross = jackknife(0.5 * (res.series["propagator"][:, 0]
                                 - res.series["propagator"][:, 1]))
        assert abs(sq.z_score(ex_sq)) < 4.0
        assert abs(cross.z_score(ex_cross)) < 4.0
        assert g0.value == pytest.approx(res.series["propagator"][:, 0].mean(), rel=1e-10)
        assert g1.error > 0

    def test_free_theory_mean_field_zero(self):
        sp = LatticeSpec(2, 4, 1.0)
        cfg = MCConfig(sp, 2.0, 0.0, sweeps=20000, thermalization=2000, seed=13)
        res = mc.metropolis_run(cfg, measure_propagator=False)
        assert abs(res.mean_field.z_score(0.0)) < 4.0
        assert 0.2 <= res.acceptance_rate <= 0.8


class TestFreePropagator:
    def test_values(self):
        sp = LatticeSpec(1, 4, 1.0)
        g = mc.free_propagator(sp, 1.0)
        # phat^2 = 4 sin^2(pi k / 4): 0, 2, 4, 2
        assert np.allclose(g, [1.0, 1.0 / 3.0, 0.2, 1.0 / 3.0])
