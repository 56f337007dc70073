"""Fixed source at the origin emitting and absorbing a single boson.

State space is L2(R^3) (+) C with vectors (psi, c), psi radial.  The free
part acts as (-Laplacian/(2m) + E) on the boson and E on the amplitude; the
interaction is -g times the symmetrized singular operator, whose quadratic
form on the constrained domain {c = sqrt(4 pi) phi(0) / lambda} reduces to
+g * 4 pi * int |phi'|^2 dr regardless of lambda.  An optional point term
mu * conj(c(f)) c(g) is supported (it is symmetric on the constrained
domain for every real mu).

The amplitude is eliminated through the boundary condition, so the free
coefficients are the profile nodes 0..n-2 (homogeneous Dirichlet at r_max
stands in for compact support).  Node 0 is simultaneously phi(0) and, up to
the lambda factor, the source amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .radial import (FOUR_PI, SQRT_FOUR_PI, RadialGrid, RadialProfile,
                     boundary_data, inner_product, kinetic_edge_matrix,
                     lambda_edge_matrix, make_grid, mass_weights)
from .system import (AssembledSystem, ZeroNormError, check_mass_positive,
                     evolve_dofs, lowest_eigenpairs_dofs, mass_from_embedding,
                     project_to_dofs, pullback)

DEFAULT_LAMBDA = SQRT_FOUR_PI

PROJECTION_WARN = 1e-6


@dataclass(frozen=True)
class ToyParams:
    """Physical inputs: boson mass, source energy, coupling, and the
    scaling freedom of the boundary pairing."""

    mass_m: float
    energy_e: float
    coupling_g: float
    lambda_scale: float = DEFAULT_LAMBDA
    point_coupling_mu: float = 0.0

    def __post_init__(self):
        if self.mass_m <= 0:
            raise ValueError("mass_m must be positive")
        if self.energy_e < 0:
            raise ValueError("energy_e must be >= 0")
        if self.coupling_g <= 0:
            raise ValueError("coupling_g must be positive")
        if self.lambda_scale == 0:
            raise ValueError("lambda_scale must be nonzero")


@dataclass
class ToyState:
    """Pair (boson profile, source amplitude)."""

    profile: RadialProfile
    amplitude_c: complex

    def norm_squared(self) -> float:
        return float(np.real(inner_product(self.profile, self.profile))
                     + abs(self.amplitude_c) ** 2)


def amplitude_coefficient(params: ToyParams) -> float:
    """c = amplitude_coefficient * phi(0) on the constrained domain."""
    return SQRT_FOUR_PI / params.lambda_scale


def constraint_embed(profile: RadialProfile, params: ToyParams) -> ToyState:
    """Attach the amplitude the boundary condition dictates."""
    b = boundary_data(profile).value_b
    return ToyState(profile=profile,
                    amplitude_c=amplitude_coefficient(params) * b)


def constraint_residual(state: ToyState, params: ToyParams) -> float:
    b = boundary_data(state.profile).value_b
    return abs(state.amplitude_c - amplitude_coefficient(params) * b)


def sector_probabilities(state: ToyState):
    """(p_boson, p_source); the source share is the complement so the two
    sum to one exactly."""
    boson = float(np.real(inner_product(state.profile, state.profile)))
    source = abs(state.amplitude_c) ** 2
    total = boson + source
    if total <= 0.0:
        raise ZeroNormError("state has zero norm")
    p_boson = boson / total
    return p_boson, 1.0 - p_boson


def _embedding(grid: RadialGrid, params: ToyParams) -> sp.csr_matrix:
    """Free coefficients (nodes 0..n-2) -> raw coordinates (n nodes, c)."""
    n = grid.n_nodes
    ndof = n - 1
    rows = list(range(ndof)) + [n]
    cols = list(range(ndof)) + [0]
    data = [1.0] * ndof + [amplitude_coefficient(params)]
    return sp.csr_matrix((data, (rows, cols)), shape=(n + 1, ndof))


def assemble(params: ToyParams, grid: RadialGrid) -> AssembledSystem:
    """Constrained nodal Hamiltonian and mass matrix.

    H = kinetic/(2m) + E*M + g*G (+ mu*P) with G the positive interaction
    block; every term is assembled as a symmetric product, so H equals its
    transpose entrywise and H is positive semidefinite whenever E >= 0,
    g > 0 and mu >= 0.
    """
    n = grid.n_nodes
    embed = _embedding(grid, params)
    embed_nodes = embed[:n]
    full_weights = np.concatenate([mass_weights(grid), [1.0]])

    M = mass_from_embedding(embed, full_weights)
    check_mass_positive(M)
    K = pullback(kinetic_edge_matrix(grid), embed_nodes)
    G = pullback(lambda_edge_matrix(grid), embed_nodes)

    H = (1.0 / (2.0 * params.mass_m)) * K + params.energy_e * M
    H = H + params.coupling_g * G
    coef = amplitude_coefficient(params)
    if params.point_coupling_mu != 0.0:
        P = sp.csr_matrix(([coef * coef], ([0], [0])),
                          shape=(n - 1, n - 1))
        H = H + params.point_coupling_mu * P

    boson_w = mass_weights(grid)[: n - 1]
    source_w = np.zeros(n - 1)
    source_w[0] = coef * coef
    return AssembledSystem(
        hamiltonian=H.tocsr(), mass_matrix=M, interaction_block=G,
        params=params, grid=grid, embed=embed, full_weights=full_weights,
        channel_weights=[boson_w, source_w],
        channel_labels=["p_boson", "p_source"],
        meta={"model": "toy"})


def state_to_full(state: ToyState) -> np.ndarray:
    return np.concatenate([state.profile.values, [state.amplitude_c]])


def dofs_to_state(system: AssembledSystem, dofs: np.ndarray) -> ToyState:
    full = system.embed @ dofs
    n = system.grid.n_nodes
    return ToyState(profile=RadialProfile(system.grid, full[:n]),
                    amplitude_c=complex(full[n]))


def state_to_dofs(system: AssembledSystem, state: ToyState):
    """Project an arbitrary (psi, c) pair onto the constrained basis.

    Returns (dofs, relative norm loss); the loss is nonzero when the input
    violates the boundary condition or spills past the Dirichlet wall.
    """
    return project_to_dofs(system, state_to_full(state))


def pure_source_dofs(system: AssembledSystem) -> np.ndarray:
    """The discrete source-dominated unit state: a nodal bump at r=0 whose
    boson-sector weight vanishes (node 0 carries no volume weight)."""
    x = np.zeros(system.n_dofs, dtype=np.complex128)
    x[0] = 1.0 / np.sqrt(system.mass_diag[0])
    return x


def lowest_eigenpairs(system: AssembledSystem, k: int):
    """k smallest generalized eigenpairs as (value, ToyState), ascending."""
    vals, vecs = lowest_eigenpairs_dofs(system, k)
    return [(float(vals[j]), dofs_to_state(system, vecs[:, j]))
            for j in range(k)]


def evolve(system: AssembledSystem, initial, dt: float, n_steps: int,
           store_states: bool = False):
    """Implicit-midpoint trajectory from a ToyState or a coefficient
    vector.  Projection loss above 1e-6 is recorded as a warning."""
    if isinstance(initial, ToyState):
        dofs, loss = state_to_dofs(system, initial)
    else:
        dofs = np.asarray(initial, dtype=np.complex128)
        loss = 0.0
    traj = evolve_dofs(system, dofs, dt, n_steps, store_states=store_states)
    traj.projection_loss = loss
    if loss > PROJECTION_WARN:
        traj.warnings.append(
            f"initial state projection lost {loss:.3e} of its norm")
    return traj


def demo_grid(r_max: float = 10.0, n_nodes: int = 129) -> RadialGrid:
    return make_grid(r_max, n_nodes)
