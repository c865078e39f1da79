"""Translation-breaking background: Bloch/Toeplitz propagator and spectra.

The sn^2 potential is expanded in its cosine series, the momentum-space
propagator is solved on a band of momenta coupled by multiples of
P = (pi/K) p0, and Kallen-Lehmann weights are extracted by constrained
least squares.
"""

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import jacobi_scd, jacobi_sn
from .lattice import LatticeSpec, ScalarField, hat_p_squared, laplacian_values

__all__ = [
    "BlochSystem",
    "SpectralDecomposition",
    "build_bloch_system",
    "potential_resummation_check",
    "bloch_solve",
    "kl_masses",
    "spectral_fit",
    "lame_homogeneous_residual",
    "lame_mode_mass",
]

DEFAULT_R = 40
BAND_FACTOR = 3  # band half-width defaults to 3R


@dataclass(frozen=True)
class BlochSystem:
    """Truncated Toeplitz data for the Lame propagator equation."""

    M2: float
    Mbar2: float
    P: np.ndarray
    Vr: np.ndarray
    R: int
    lam: float
    b: float
    p0: np.ndarray
    modulus: object

    def __post_init__(self):
        object.__setattr__(self, "P", np.atleast_1d(np.asarray(self.P, dtype=float)))
        object.__setattr__(self, "p0", np.atleast_1d(np.asarray(self.p0, dtype=float)))
        object.__setattr__(self, "Vr", np.asarray(self.Vr, dtype=float))


@dataclass(frozen=True)
class SpectralDecomposition:
    weights: np.ndarray
    masses: np.ndarray
    normalization_defect: float
    fit_residual: float


def build_bloch_system(lam, b, p0, modulus, m2, Gnn, R=DEFAULT_R):
    """M bar^2, P = (pi/K) p0, and the harmonic couplings V_1..V_R.

    V_r = -(lam/2)(b^2 pi^2 / k^2 K^2) r q^r / (1 - q^{2r}).
    """
    if not (0.0 < modulus.m < 1.0):
        raise ValueError("Bloch system needs real modulus m in (0, 1)")
    if R < 1:
        raise ValueError("R must be >= 1")
    m, K, E, q = modulus.m, modulus.K, modulus.E, modulus.q
    M2 = m2 + 0.5 * lam * Gnn
    Mbar2 = M2 + (lam / (2.0 * m)) * b * b * (1.0 - E / K)
    r = np.arange(1, R + 1, dtype=float)
    Vr = -(0.5 * lam) * (b * b * math.pi ** 2 / (m * K * K)) * r * q ** r / (1.0 - q ** (2 * r))
    P = (math.pi / K) * np.atleast_1d(np.asarray(p0, dtype=float))
    return BlochSystem(M2=M2, Mbar2=Mbar2, P=P, Vr=Vr, R=R,
                       lam=lam, b=b, p0=np.atleast_1d(p0), modulus=modulus)


def _step_scalar(p0, a):
    """p0 . (a e) for one lattice step e along the dominant p0 axis."""
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    axis = int(np.argmax(np.abs(p0)))
    return a * p0[axis]


def potential_resummation_check(sys, ell, a):
    """Both sides of the cosine resummation of the sn^2 potential.

    lhs = Mbar^2 + 2 sum_r V_r cos(pi r ell p0.a / K)
    rhs = M^2 + (lam/2) b^2 sn^2(ell p0.a, k); returns (lhs, rhs, gap).
    """
    K = sys.modulus.K
    u = ell * _step_scalar(sys.p0, a)
    r = np.arange(1, sys.R + 1, dtype=float)
    lhs = sys.Mbar2 + 2.0 * float(np.sum(sys.Vr * np.cos(math.pi * r * u / K)))
    rhs = sys.M2 + 0.5 * sys.lam * sys.b ** 2 * jacobi_sn(u, sys.modulus.m) ** 2
    return lhs, rhs, abs(lhs - rhs)


def bloch_solve(p, sys, lattice, N=None):
    """Truncated band solve of the coupled momentum equation.

    Row n: (phat^2_{p+nP} + Mbar^2) G_n + sum_r V_r (G_{n+r} + G_{n-r})
    = delta_{n0}, with G zero outside the band [-N, N].  Returns the
    2N+1 values G_{-N}..G_N.
    """
    if N is None:
        N = BAND_FACTOR * sys.R
    p = np.atleast_1d(np.asarray(p, dtype=float))
    size = 2 * N + 1
    A = np.zeros((size, size))
    for i, n in enumerate(range(-N, N + 1)):
        A[i, i] = hat_p_squared(p + n * sys.P, lattice) + sys.Mbar2
        for r in range(1, sys.R + 1):
            v = sys.Vr[r - 1]
            if i + r < size:
                A[i, i + r] += v
            if i - r >= 0:
                A[i, i - r] += v
    rhs = np.zeros(size)
    rhs[N] = 1.0
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"singular band matrix in bloch_solve: {exc}") from exc
    return sol


def kl_masses(sys, a, ells):
    """m_ell^2 = M^2 + (lam/2) b^2 sn^2(ell p0.a, k) for each ell."""
    u0 = _step_scalar(sys.p0, a)
    return np.array([
        sys.M2 + 0.5 * sys.lam * sys.b ** 2 * jacobi_sn(ell * u0, sys.modulus.m) ** 2
        for ell in ells
    ])


def _merge_poles(masses, tol=1e-10):
    """Collapse duplicate masses (sn^2 is periodic in ell)."""
    merged = []
    for m2 in masses:
        if all(abs(m2 - x) > tol for x in merged):
            merged.append(float(m2))
    return np.array(merged)


def spectral_fit(samples, masses):
    """Constrained LS fit of Kallen-Lehmann weights B_ell >= 0, sum = 1.

    samples: list of (phat2, G) pairs; masses: candidate m_ell^2 values
    (duplicates within 1e-10 are merged first).  The sum constraint is
    enforced exactly via a KKT solve; negative weights are zeroed by a
    simple active-set pass.
    """
    masses = _merge_poles(np.asarray(masses, dtype=float))
    ph2 = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if len(y) < len(masses):
        raise ValueError("need at least as many samples as weights")
    design = 1.0 / (ph2[:, None] + masses[None, :])

    active = np.ones(len(masses), dtype=bool)
    for _ in range(len(masses) + 1):
        idx = np.flatnonzero(active)
        Phi = design[:, idx]
        k = len(idx)
        # KKT system for min ||Phi B - y||^2 s.t. 1^T B = 1
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * Phi.T @ Phi
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([2.0 * Phi.T @ y, [1.0]])
        solution = np.linalg.solve(kkt, rhs)
        B_active = solution[:k]
        if np.all(B_active >= -1e-12):
            break
        active[idx[B_active < -1e-12]] = False
    B = np.zeros(len(masses))
    B[np.flatnonzero(active)] = np.clip(B_active, 0.0, None)
    resid = float(np.linalg.norm(design @ B - y))
    defect = abs(float(np.sum(B)) - 1.0)
    return SpectralDecomposition(weights=B, masses=masses,
                                 normalization_defect=defect, fit_residual=resid)


def lame_mode_mass(kind, lam, b, modulus):
    """M^2 for which the candidate is a continuum zero mode.

    With p^2 = lam b^2/(12 m): cn.dn sits at M^2 = -(1+m) p^2 and sn.dn
    at M^2 = -(1+4m) p^2 (distinct Lame eigenvalues).
    """
    m = modulus.m
    p2 = lam * b * b / (12.0 * m)
    if kind == "CN_DN":
        return -(1.0 + m) * p2
    if kind == "SN_DN":
        return -(1.0 + 4.0 * m) * p2
    raise ValueError(f"unknown mode kind {kind!r}")


def lame_homogeneous_residual(kind, b, p, theta, modulus, M2, lam, lattice):
    """(-Lap + M^2 + (lam/2) b^2 sn^2(p.x+theta)) applied to the candidate.

    kind CN_DN uses cn.dn (the sn' mode), SN_DN uses sn.dn; the result is
    the pointwise residual field.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    x = lattice.site_coordinates()
    u = (x @ p + theta).ravel()
    m = modulus.m
    sn = np.empty(u.size)
    cand = np.empty(u.size)
    for i, ui in enumerate(u):
        s, c, d = jacobi_scd(ui, m)
        sn[i] = s
        cand[i] = c * d if kind == "CN_DN" else s * d
    sn = sn.reshape(lattice.shape)
    cand = cand.reshape(lattice.shape)
    res = (-laplacian_values(cand, lattice.a)
           + (M2 + 0.5 * lam * b * b * sn ** 2) * cand)
    return ScalarField(lattice, res)
