"""Numerical laboratory for sector-coupled Hamiltonians.

Symmetrized singular interaction operators on discretized radial Hilbert
spaces: assembly of exactly Hermitian stiffness/mass pencils, spectra,
norm-conserving inter-sector dynamics, and a quadrature suite certifying
the underlying operator identities.
"""

__version__ = "0.1.0"

from .radial import (BoundaryData, RadialGrid, RadialProfile, apply_lambda,
                     boundary_data, discrete_asymmetry, inner_product,
                     kinetic_form, lambda_form, make_grid)
from .system import AssembledSystem, Trajectory
from .toy import ToyParams, ToyState, assemble, constraint_embed, evolve
from .fockchain import (FockChainParams, FockChainState, apply_boundary_b,
                        apply_boundary_c, assemble_chain, evolve_chain,
                        symmetrize)
from .pair import (PairParams, PairState, annihilation_dynamics,
                   assemble_pair, cm_coordinates, relative_kinetic_identity)
from .cuspfn import (GaussianCuspFunction, SceneConfig, boundary_data_3d,
                     sphere_average)
from .brackets import QuadratureSpec, excised_bracket
from .verify import (run_suite, verify_m_identity, verify_sigma_identity,
                     verify_v_crossterm)

__all__ = [
    "AssembledSystem", "BoundaryData", "FockChainParams", "FockChainState",
    "GaussianCuspFunction", "PairParams", "PairState", "QuadratureSpec",
    "RadialGrid", "RadialProfile", "SceneConfig", "ToyParams", "ToyState",
    "Trajectory", "annihilation_dynamics", "apply_boundary_b",
    "apply_boundary_c", "apply_lambda", "assemble", "assemble_chain",
    "assemble_pair", "boundary_data", "boundary_data_3d", "cm_coordinates",
    "constraint_embed", "discrete_asymmetry", "evolve", "evolve_chain",
    "excised_bracket", "inner_product", "kinetic_form", "lambda_form",
    "make_grid", "relative_kinetic_identity", "run_suite", "sphere_average",
    "symmetrize", "verify_m_identity", "verify_sigma_identity",
    "verify_v_crossterm",
]
