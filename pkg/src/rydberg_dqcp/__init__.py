"""Ground states, snapshots and scaling analysis of Rydberg arrays on the
triangular lattice near the transition between the 1/3 and 2/3 crystals."""

from .lattice import LatticeSpec, build_geometry, bulk_mask, pairwise_couplings
from .hamiltonian import RydbergParams, build_terms, terms_to_mpo, spin_operator
from .ed import ground_state_ed
from .mps import MPS, sample_snapshots
from .dmrg import DMRGConfig, dmrg_ground_state
from .observables import order_parameter_mps, staggered_m

__version__ = "0.1.0"

__all__ = [
    "LatticeSpec", "build_geometry", "bulk_mask", "pairwise_couplings",
    "RydbergParams", "build_terms", "terms_to_mpo", "spin_operator",
    "ground_state_ed", "MPS", "sample_snapshots", "DMRGConfig", "dmrg_ground_state",
    "order_parameter_mps", "staggered_m",
]
