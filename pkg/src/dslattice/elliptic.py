"""Jacobi elliptic functions, complete integrals, the nome, and Fourier series.

Real modulus m = k^2 in (-1, 1) is supported directly; the special value
m = -1 is handled through the imaginary-modulus transformation to m = 1/2,
so no complex arithmetic appears anywhere.
"""

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "EllipticModulus",
    "FourierSeries",
    "SeriesKind",
    "complete_K",
    "complete_E",
    "nome",
    "jacobi_sn",
    "jacobi_cn",
    "jacobi_dn",
    "jacobi_scd",
    "series_coeffs",
    "sn_alternating_coeffs",
    "sn_cubed_identity_residual",
]

# Landen recursion stops once the residual modulus is below this.
_LANDEN_CUTOFF = 1e-14


def complete_K(m):
    """Complete elliptic integral of the first kind K(m), via the AGM.

    Valid for m < 1 (including negative m).
    """
    if m >= 1.0:
        raise ValueError("complete_K requires m < 1 (singular/complex regime)")
    a, b = 1.0, math.sqrt(1.0 - m)
    for _ in range(64):
        if abs(a - b) <= 4e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def complete_E(m):
    """Complete elliptic integral of the second kind E(m), via the AGM sum.

    Valid for m <= 1; E(1) = 1 exactly.
    """
    if m > 1.0:
        raise ValueError("complete_E requires m <= 1")
    if m == 1.0:
        return 1.0
    a, b = 1.0, math.sqrt(1.0 - m)
    # E = K * (1 - sum_n 2^{n-1} c_n^2), c_0^2 = m
    c2sum = 0.5 * m
    pow2 = 0.5
    for _ in range(64):
        if abs(a - b) <= 4e-16 * a:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        pow2 *= 2.0
        c2sum += pow2 * c * c
    return (math.pi / (2.0 * a)) * (1.0 - c2sum)


def _mapped_modulus(m):
    """Real modulus in (0,1) reached from m < 0 by the imaginary-modulus map."""
    return m / (m - 1.0)


def nome(m):
    """The nome q = exp(-pi K'/K).

    For m in (0,1) this is the standard expression; m = 0 returns the
    limit 0.  Negative m is routed through the imaginary-modulus map, so
    e.g. nome(-1) = nome(1/2) = exp(-pi).
    """
    if m >= 1.0:
        raise ValueError("nome requires m < 1")
    if m == 0.0:
        return 0.0
    if m < 0.0:
        m = _mapped_modulus(m)
    return math.exp(-math.pi * complete_K(1.0 - m) / complete_K(m))


def _scd_landen(u, m):
    """(sn, cn, dn) for m in [0, 1) by the descending Landen recursion."""
    ks = []
    while m > _LANDEN_CUTOFF:
        kp = math.sqrt(1.0 - m)
        k1 = (1.0 - kp) / (1.0 + kp)
        ks.append(k1)
        u = u / (1.0 + k1)
        m = k1 * k1
    s, c = math.sin(u), math.cos(u)
    d = math.sqrt(1.0 - m * s * s)
    for k1 in reversed(ks):
        denom = 1.0 + k1 * s * s
        s, c, d = (1.0 + k1) * s / denom, c * d / denom, (1.0 - k1 * s * s) / denom
    return s, c, d


def jacobi_scd(z, m):
    """(sn, cn, dn) at real argument z for m in (-1, 1) or m = -1.

    Negative m uses sn(z, m) = sd(z*sqrt(1-m), mu)/sqrt(1-m) with
    mu = -m/(1-m), together with the matching cn, dn maps.
    """
    if m >= 1.0 or m < -1.0:
        raise ValueError("modulus m must lie in (-1, 1) or equal -1")
    if m >= 0.0:
        return _scd_landen(z, m)
    mu = -m / (1.0 - m)
    root = math.sqrt(1.0 - m)
    s, c, d = _scd_landen(z * root, mu)
    return s / (d * root), c / d, 1.0 / d


def jacobi_sn(z, m):
    return jacobi_scd(z, m)[0]


def jacobi_cn(z, m):
    return jacobi_scd(z, m)[1]


def jacobi_dn(z, m):
    return jacobi_scd(z, m)[2]


@dataclass(frozen=True)
class EllipticModulus:
    """Modulus m = k^2 with its cached elliptic constants.

    For m = -1 the constants come from the imaginary-modulus map to
    m = 1/2, giving K(-1) = K(1/2)/sqrt(2) and q(-1) = q(1/2).
    """

    m: float
    K: float
    Kprime: float
    E: float
    q: float

    @classmethod
    def from_m(cls, m):
        if m >= 1.0 or m < -1.0:
            raise ValueError("modulus m must lie in (-1, 1) or equal -1")
        if m == 0.0:
            return cls(m=0.0, K=math.pi / 2, Kprime=math.inf, E=math.pi / 2, q=0.0)
        K = complete_K(m)
        E = complete_E(m)
        if m > 0.0:
            Kprime = complete_K(1.0 - m)
        else:
            mu = _mapped_modulus(m)
            Kprime = complete_K(1.0 - mu) / math.sqrt(1.0 - m)
        q = math.exp(-math.pi * Kprime / K)
        return cls(m=m, K=K, Kprime=Kprime, E=E, q=q)


class SeriesKind(Enum):
    SN = "sn"
    SN_CUBED = "sn_cubed"
    SN_SQUARED = "sn_squared"
    SN_PRIME = "sn_prime"
    CN_PRIME = "cn_prime"


# Per kind: (trig, harmonic) with trig in {"sin", "cos"} and harmonic the
# map n -> frequency multiple of pi/(2K) for the n-th stored coefficient.
_ODD = ("odd", lambda n: 2 * n + 1)
_EVEN = ("even", lambda n: n)  # SN_SQUARED: cos(r pi u / K), r = n >= 1

_KIND_TRIG = {
    SeriesKind.SN: "sin",
    SeriesKind.SN_CUBED: "sin",
    SeriesKind.SN_SQUARED: "cos",
    SeriesKind.SN_PRIME: "cos",
    SeriesKind.CN_PRIME: "sin",
}


@dataclass(frozen=True)
class FourierSeries:
    """Truncated elliptic Fourier series with exact term-wise derivatives."""

    kind: SeriesKind
    coefficients: tuple
    constant: float
    K: float
    m: float
    truncation: int

    def frequencies(self):
        """Angular frequency of each stored term."""
        if self.kind is SeriesKind.SN_SQUARED:
            return [(r + 1) * math.pi / self.K for r in range(self.truncation)]
        return [(2 * n + 1) * math.pi / (2.0 * self.K) for n in range(self.truncation)]

    def evaluate(self, z, derivative=0):
        """Partial sum at z, optionally differentiated term-wise."""
        trig = _KIND_TRIG[self.kind]
        shift = derivative * math.pi / 2.0
        total = self.constant if derivative == 0 else 0.0
        for c, w in zip(self.coefficients, self.frequencies()):
            phase = w * z + shift
            term = math.sin(phase) if trig == "sin" else math.cos(phase)
            total += c * (w ** derivative) * term
        return total


def sn_alternating_coeffs(modulus, N):
    """Coefficients of the alternating sn series at m = -1."""
    K = modulus.K
    out = []
    for n in range(N):
        e = math.exp(-(n + 0.5) * math.pi)
        out.append((2.0 * math.pi / K) * (-1) ** n * e / (1.0 + math.exp(-(2 * n + 1) * math.pi)))
    return tuple(out)


def series_coeffs(kind, modulus, N):
    """First N Fourier coefficients of the named elliptic series.

    SN carries weight q^{n+1/2}/(1-q^{2n+1}) on sin((2n+1) pi z / 2K);
    SN_CUBED multiplies each SN term by
    (1/2k^2)(-(2n+1)^2 pi^2/4K^2 + (1+k^2)); SN_SQUARED has constant
    (1/k^2)(1 - E/K) and cosine weights -(2 pi^2/k^2 K^2) r q^r/(1-q^{2r});
    SN_PRIME and CN_PRIME are the term-wise derivative series of sn and cn.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    m, K, E, q = modulus.m, modulus.K, modulus.E, modulus.q
    if m == 0.0:
        raise ValueError("series are singular at m = 0")
    if m < 0.0:
        if m != -1.0:
            raise ValueError("negative-modulus series supported only at m = -1")
        if kind is SeriesKind.SN:
            return FourierSeries(kind, sn_alternating_coeffs(modulus, N), 0.0, K, m, N)
        if kind is SeriesKind.SN_CUBED:
            base = sn_alternating_coeffs(modulus, N)
            coeffs = tuple(
                c * (-0.5) * (-((2 * n + 1) ** 2) * math.pi ** 2 / (4.0 * K * K))
                for n, c in enumerate(base)
            )
            return FourierSeries(kind, coeffs, 0.0, K, m, N)
        raise ValueError(f"series kind {kind} not available at m = -1")

    k = math.sqrt(m)
    if kind is SeriesKind.SN_SQUARED:
        coeffs = []
        for r in range(1, N + 1):
            coeffs.append(-(2.0 * math.pi ** 2 / (m * K * K)) * r * q ** r / (1.0 - q ** (2 * r)))
        constant = (1.0 / m) * (1.0 - E / K)
        return FourierSeries(kind, tuple(coeffs), constant, K, m, N)

    base = []
    for n in range(N):
        base.append((2.0 * math.pi / (K * k)) * q ** (n + 0.5) / (1.0 - q ** (2 * n + 1)))

    if kind is SeriesKind.SN:
        coeffs = tuple(base)
    elif kind is SeriesKind.SN_CUBED:
        coeffs = tuple(
            c * (1.0 / (2.0 * m)) * (-((2 * n + 1) ** 2) * math.pi ** 2 / (4.0 * K * K) + (1.0 + m))
            for n, c in enumerate(base)
        )
    elif kind is SeriesKind.SN_PRIME:
        coeffs = tuple(c * (2 * n + 1) * math.pi / (2.0 * K) for n, c in enumerate(base))
    elif kind is SeriesKind.CN_PRIME:
        coeffs = []
        for n in range(N):
            w = (math.pi ** 2 / (K * K * k)) * (2 * n + 1) * q ** (n + 0.5) / (1.0 + q ** (2 * n + 1))
            coeffs.append(-w)
        coeffs = tuple(coeffs)
    else:
        raise ValueError(f"unknown series kind {kind}")
    return FourierSeries(kind, coeffs, 0.0, K, modulus.m, N)


def sn_cubed_identity_residual(z, modulus, N=32):
    """|sn^3(z) - (1/2k^2)(sn''(z) + (1+k^2) sn(z))|.

    sn'' comes from term-wise differentiation of the sn Fourier series;
    sn and sn^3 are evaluated directly.  At m = -1 the identity reduces
    to sn^3 = -sn''/2.
    """
    m = modulus.m
    if m == 0.0:
        raise ValueError("identity is singular at m = 0 (1/k^2)")
    sn_series = series_coeffs(SeriesKind.SN, modulus, N)
    sn2pp = sn_series.evaluate(z, derivative=2)
    sn = jacobi_sn(z, m)
    lhs = sn ** 3
    rhs = (1.0 / (2.0 * m)) * (sn2pp + (1.0 + m) * sn)
    return abs(lhs - rhs)
