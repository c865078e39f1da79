"""Hypercubic periodic lattices, scalar fields, Laplacian, and the action."""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatticeSpec",
    "ScalarField",
    "laplacian_apply",
    "hat_p_squared",
    "phat_squared_grid",
    "momentum_grid",
    "action",
    "eom_residual",
    "plane_wave",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class LatticeSpec:
    """d-dimensional hypercubic lattice, L sites per direction, spacing a."""

    d: int
    L: int
    a: float

    def __post_init__(self):
        if self.d < 1 or self.L < 1 or self.a <= 0:
            raise ValueError("need d >= 1, L >= 1, a > 0")

    @property
    def nsites(self):
        return self.L ** self.d

    @property
    def shape(self):
        return (self.L,) * self.d

    def site_coordinates(self):
        """Array of shape (*shape, d) with x = a*n per site."""
        axes = np.indices(self.shape)  # (d, *shape)
        return self.a * np.moveaxis(axes, 0, -1)

    def momenta(self):
        """All grid momenta p_mu = 2 pi k_mu / (L a), shape (*shape, d)."""
        axes = np.indices(self.shape)
        return (2.0 * math.pi / (self.L * self.a)) * np.moveaxis(axes, 0, -1)


@dataclass
class ScalarField:
    """Real field over the sites of a lattice, stored as a d-dim array."""

    lattice: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.lattice.shape)

    @classmethod
    def zeros(cls, lattice):
        return cls(lattice, np.zeros(lattice.shape))

    @classmethod
    def constant(cls, lattice, c):
        return cls(lattice, np.full(lattice.shape, float(c)))

    def copy(self):
        return ScalarField(self.lattice, self.values.copy())


def _check_same_lattice(f, g):
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")


def laplacian_values(v, a):
    """Nearest-neighbor Laplacian on a raw periodic array."""
    out = -2.0 * v.ndim * v
    for axis in range(v.ndim):
        out = out + np.roll(v, 1, axis=axis) + np.roll(v, -1, axis=axis)
    return out / (a * a)


def laplacian_apply(f):
    """Lattice Laplacian with periodic wrap; annihilates constants."""
    return ScalarField(f.lattice, laplacian_values(f.values, f.lattice.a))


def hat_p_squared(p, lattice):
    """(4/a^2) sum_mu sin^2(p_mu a / 2), the -Laplacian plane-wave eigenvalue."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    a = lattice.a
    return float((4.0 / a ** 2) * np.sum(np.sin(p * a / 2.0) ** 2))


def phat_squared_grid(lattice):
    """hat p^2 over the full momentum grid, shape lattice.shape."""
    a = lattice.a
    line = (4.0 / a ** 2) * np.sin(math.pi * np.arange(lattice.L) / lattice.L) ** 2
    out = np.zeros(lattice.shape)
    for axis in range(lattice.d):
        shape = [1] * lattice.d
        shape[axis] = lattice.L
        out = out + line.reshape(shape)
    return out


def momentum_grid(lattice):
    """Iterator of (index tuple, momentum vector) over the grid."""
    base = 2.0 * math.pi / (lattice.L * lattice.a)
    for idx in np.ndindex(lattice.shape):
        yield idx, base * np.asarray(idx, dtype=float)


def plane_wave(lattice, p, phase=0.0):
    """sin(p.x + phase) over the sites."""
    x = lattice.site_coordinates()
    return ScalarField(lattice, np.sin(x @ np.asarray(p, dtype=float) + phase))


def action(f, m2, lam):
    """Lattice action a^d sum [phi(-Lap)phi/2 + m^2 phi^2/2 + lam phi^4/4!]."""
    v = f.values
    a = f.lattice.a
    kin = 0.5 * np.sum(v * (-laplacian_values(v, a)))
    pot = 0.5 * m2 * np.sum(v * v) + (lam / 24.0) * np.sum(v ** 4)
    return float(a ** f.lattice.d * (kin + pot))


def action_difference_form(f, m2, lam):
    """Same action from the nearest-neighbor difference form (cross-check)."""
    v = f.values
    a = f.lattice.a
    kin = 0.0
    for axis in range(f.lattice.d):
        diff = np.roll(v, -1, axis=axis) - v
        kin += 0.5 * np.sum(diff * diff) / (a * a)
    pot = 0.5 * m2 * np.sum(v * v) + (lam / 24.0) * np.sum(v ** 4)
    return float(a ** f.lattice.d * (kin + pot))


def eom_residual(f, m2, lam, j=None):
    """-Lap(phi) + m^2 phi + (lam/6) phi^3 - j, pointwise."""
    if j is not None:
        _check_same_lattice(f, j)
    v = f.values
    out = -laplacian_values(v, f.lattice.a) + m2 * v + (lam / 6.0) * v ** 3
    if j is not None:
        out = out - j.values
    return ScalarField(f.lattice, out)


_MAGIC = "dslattice-field 1"


def save_field(f, path):
    """Text format: magic line, then 'd L a', then L^d values in site order."""
    with open(path, "w") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"{f.lattice.d} {f.lattice.L} {f.lattice.a!r}\n")
        for v in f.values.ravel():
            fh.write(f"{float(v)!r}\n")


def load_field(path):
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != _MAGIC:
            raise ValueError(f"not a field file: {path}")
        d_s, L_s, a_s = fh.readline().split()
        lattice = LatticeSpec(int(d_s), int(L_s), float(a_s))
        values = np.array([float(line) for line in fh])
    if values.size != lattice.nsites:
        raise ValueError("value count does not match lattice volume")
    return ScalarField(lattice, values.reshape(lattice.shape))
