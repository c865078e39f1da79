"""Discrete Dyson-Schwinger system for lattice phi^4 scalar field theory.

Subpackages: elliptic (Jacobi functions and Fourier series), lattice
(geometry and operators), classical (sn waves and functional derivatives),
dse_constant (gap equation and cumulants), lame_bloch (translation-breaking
propagator), mc (Metropolis oracle), cli (batch pipelines).
"""

__version__ = "0.1.0"
