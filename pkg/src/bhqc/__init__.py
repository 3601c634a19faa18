"""Quench dynamics of one-dimensional interacting lattice bosons.

Exact sector-resolved Chebyshev propagation, matrix-product-state TEBD,
two-particle correlation observables (correlation transport distance and
its norm), spectral chaos diagnostics, and the analytic reference curves
for the free and hard-core limits.
"""

from bhqc.model import (
    BasisSector,
    CapacityError,
    HamiltonianMatrix,
    ModelParams,
    SpectralBoundsError,
    build_hamiltonian,
    build_parity_sector,
    enumerate_basis,
    sector_for,
    spectral_bounds,
)
from bhqc.chebyshev import (
    NormDriftError,
    PropagatorPlan,
    StateVector,
    TimeGrid,
    evolve_on_grid,
    fock_state,
    plan_propagator,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSector",
    "CapacityError",
    "HamiltonianMatrix",
    "ModelParams",
    "NormDriftError",
    "PropagatorPlan",
    "SpectralBoundsError",
    "StateVector",
    "TimeGrid",
    "build_hamiltonian",
    "build_parity_sector",
    "enumerate_basis",
    "evolve_on_grid",
    "fock_state",
    "plan_propagator",
    "sector_for",
    "spectral_bounds",
    "step",
    "__version__",
]
