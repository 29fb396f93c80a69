"""Numerical experiments with spectral triples on manifolds with boundary.

Submodules
----------
clifford         gamma matrices, boundary chirality, conjugation operators
boundary_system  Green matrices, selfadjointness criterion, 1D algebra tests
discretization   exactly Hermitian realizations (1D interval, half-torus)
spectral         zeta sums, residue fits, heat traces, spectral action, tadpoles
regularity       iterated commutator probes
"""

__version__ = "0.1.0"
