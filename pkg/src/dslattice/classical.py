"""Classical sn-wave solutions and the functional-derivative machinery.

The fluctuation operator is applied matrix-free; columns of its inverse
come from diagonally preconditioned conjugate gradients.
"""

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticModulus, jacobi_sn
from .lattice import LatticeSpec, ScalarField, eom_residual, laplacian_values

__all__ = [
    "SnWave",
    "DispersionMode",
    "AmplitudeSolution",
    "SolverBreakdownError",
    "NewtonError",
    "build_sn_wave",
    "mode_hat_p_squared",
    "dispersion_residual",
    "dispersion_solve_b2",
    "continuum_constraints",
    "sn_wave_for_extent",
    "sn_wave_eom_convergence",
    "hessian_apply",
    "classical_propagator_column",
    "second_functional_derivative",
    "newton_solve_eom",
]


class SolverBreakdownError(RuntimeError):
    """CG met a non-positive curvature direction or failed to converge."""


class NewtonError(RuntimeError):
    """Newton iteration did not reach the requested residual."""


@dataclass(frozen=True)
class SnWave:
    """Background b * sn(p.x + theta, k)."""

    b: float
    p: np.ndarray
    theta: float
    modulus: EllipticModulus

    def __post_init__(self):
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))


@dataclass(frozen=True)
class DispersionMode:
    n: int
    p_hat_sq: float
    residual: float


@dataclass(frozen=True)
class AmplitudeSolution:
    b2: float
    real_amplitude: bool


def build_sn_wave(wave, lattice):
    """Evaluate the sn wave at every lattice site."""
    x = lattice.site_coordinates()
    u = x @ wave.p + wave.theta
    m = wave.modulus.m
    vals = np.array([jacobi_sn(ui, m) for ui in u.ravel()]).reshape(lattice.shape)
    return ScalarField(lattice, wave.b * vals)


def mode_hat_p_squared(n, p, modulus, lattice):
    """(4/a^2) sum_mu sin^2((2n+1) (pi/2K) p_mu a / 2) for harmonic n."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    a = lattice.a
    scale = (2 * n + 1) * math.pi / (2.0 * modulus.K)
    return float((4.0 / a ** 2) * np.sum(np.sin(scale * p * a / 2.0) ** 2))


def _bracket(n, modulus):
    K, m = modulus.K, modulus.m
    return -((2 * n + 1) ** 2) * math.pi ** 2 / (4.0 * K * K) + (1.0 + m)


def dispersion_residual(n, b, p, m2, lam, modulus, lattice):
    """Harmonic-n residual of the sn-wave dispersion relation."""
    ph2 = mode_hat_p_squared(n, p, modulus, lattice)
    res = abs(ph2 + m2 + (lam / (12.0 * modulus.m)) * b * b * _bracket(n, modulus))
    return DispersionMode(n=n, p_hat_sq=ph2, residual=res)


def dispersion_solve_b2(mode_n, p, m2, lam, modulus, lattice):
    """Amplitude squared making harmonic mode_n satisfy the dispersion relation.

    b^2 may come out negative (no real Euclidean amplitude); the sign is
    reported via the real_amplitude flag rather than raised.
    """
    if lam == 0.0:
        raise ValueError("dispersion requires lambda != 0")
    br = _bracket(mode_n, modulus)
    if br == 0.0:
        raise ZeroDivisionError("degenerate mode: dispersion bracket vanishes")
    ph2 = mode_hat_p_squared(mode_n, p, modulus, lattice)
    b2 = -12.0 * modulus.m * (ph2 + m2) / (lam * br)
    return AmplitudeSolution(b2=b2, real_amplitude=b2 >= 0.0)


def continuum_constraints(lam, b, modulus):
    """(p^2, m^2) for which the sn wave solves the continuum EOM exactly.

    p^2 = lam b^2 / (12 m) and m^2 = -(1+m) p^2.
    """
    m = modulus.m
    p2 = lam * b * b / (12.0 * m)
    return p2, -(1.0 + m) * p2


def sn_wave_for_extent(modulus, lam, extent, theta=0.0):
    """Continuum-constrained sn wave with exactly one period over `extent`.

    Returns (wave, m2).  p is fixed to 4K/extent so the wave is periodic
    on any 1D lattice with L*a = extent, and b is chosen from p.
    """
    p = 4.0 * modulus.K / extent
    b2 = 12.0 * modulus.m * p * p / lam
    if b2 < 0.0:
        raise ValueError("no real amplitude for this (lambda, modulus)")
    b = math.sqrt(b2)
    m2 = -(1.0 + modulus.m) * p * p
    return SnWave(b=b, p=np.array([p]), theta=theta, modulus=modulus), m2


def sn_wave_eom_convergence(wave, m2, lam, spacings):
    """Max-norm EOM residual of the sn wave for each spacing (1D).

    The physical extent 4K/p (one period) is held fixed, so each spacing
    must divide it into an integer number of sites.
    """
    p = float(wave.p[0])
    extent = 4.0 * wave.modulus.K / abs(p)
    out = []
    for a in spacings:
        L_float = extent / a
        L = int(round(L_float))
        if abs(L_float - L) > 1e-9 * L:
            raise ValueError(f"spacing {a} incommensurate with the sn period")
        lattice = LatticeSpec(d=1, L=L, a=extent / L)
        phi = build_sn_wave(wave, lattice)
        res = eom_residual(phi, m2, lam)
        out.append((a, float(np.max(np.abs(res.values)))))
    return out


def hessian_apply(background, v, m2, lam):
    """(-Lap + m^2 + (lam/2) phi^2) v at the given background phi."""
    if background.lattice != v.lattice:
        raise ValueError("fields live on different lattices")
    a = background.lattice.a
    out = -laplacian_values(v.values, a) + (m2 + 0.5 * lam * background.values ** 2) * v.values
    return ScalarField(background.lattice, out)


def _cg(apply_op, rhs, diag, tol, maxiter):
    """Preconditioned CG on raw arrays; raises on indefinite operators."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return x
    z = r / diag
    d = z.copy()
    rz = float(np.sum(r * z))
    for _ in range(maxiter):
        Ad = apply_op(d)
        dAd = float(np.sum(d * Ad))
        if dAd <= 0.0:
            raise SolverBreakdownError(
                f"negative curvature detected (d.Ad = {dAd:.3e}); operator not positive definite"
            )
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = r / diag
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise SolverBreakdownError("CG failed to converge within maxiter")


def _hessian_solve(background, rhs, m2, lam, tol=1e-12):
    a = background.lattice.a
    diag_term = 2.0 * background.lattice.d / (a * a) + m2 + 0.5 * lam * background.values ** 2
    diag = np.where(diag_term > 0.0, diag_term, 1.0)

    def apply_op(v):
        return -laplacian_values(v, a) + (m2 + 0.5 * lam * background.values ** 2) * v

    n = background.lattice.nsites
    x = _cg(apply_op, rhs, diag, tol, maxiter=10 * n + 100)
    return x


def classical_propagator_column(background, source_site, m2, lam, tol=1e-12):
    """Column `source_site` of the inverse fluctuation operator."""
    rhs = np.zeros(background.lattice.shape)
    rhs[source_site] = 1.0
    x = _hessian_solve(background, rhs, m2, lam, tol=tol)
    return ScalarField(background.lattice, x)


def second_functional_derivative(background, site_m, site_l, m2, lam):
    """d^2 phi_n / d j_m d j_l: one quartic vertex between three propagators."""
    col_m = classical_propagator_column(background, site_m, m2, lam)
    col_l = classical_propagator_column(background, site_l, m2, lam)
    vertex = lam * background.values * col_m.values * col_l.values
    x = _hessian_solve(background, vertex, m2, lam)
    return ScalarField(background.lattice, -x)


def newton_solve_eom(j, guess, m2, lam, tol=1e-12, maxiter=50):
    """Solve -Lap phi + m^2 phi + (lam/6) phi^3 = j by Newton iteration.

    Returns (phi, iterations).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    phi = guess.copy()
    res = eom_residual(phi, m2, lam, j)
    norm = float(np.max(np.abs(res.values)))
    for it in range(maxiter):
        if norm <= tol:
            return phi, it
        step = _hessian_solve(phi, res.values, m2, lam)
        phi = ScalarField(phi.lattice, phi.values - step)
        res = eom_residual(phi, m2, lam, j)
        norm = float(np.max(np.abs(res.values)))
    raise NewtonError(f"Newton did not converge: last residual {norm:.3e}")
