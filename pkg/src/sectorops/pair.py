"""One electron-antielectron pair coupled to a single boson amplitude.

With equal fermion masses the pair kinetic operator splits into center of
mass and relative parts, Z = (z_h + zbar_k)/2 and z = z_h - zbar_k.  At
total momentum zero the pair sector reduces to a radial relative profile
chi(z) and the one-boson sector (center of mass removed) to a single
amplitude, tied by the boundary condition chi(0) = amplitude.  In these
coordinates the creation/annihilation operator has exactly the structure of
the single-source model, with kinetic prefactor 1/(2 * reduced mass)
= 1/fermion_mass, so assembly delegates to that model under the parameter
map m -> fermion_mass/2, E -> boson_channel_energy.  The fermion-count
factor of the inter-sector pairing equals one in this reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import toy
from .radial import RadialGrid, RadialProfile
from .system import AssembledSystem, evolve_dofs


@dataclass(frozen=True)
class PairParams:
    fermion_mass: float
    boson_channel_energy: float
    coupling_g: float

    def __post_init__(self):
        if self.fermion_mass <= 0:
            raise ValueError("fermion_mass must be positive")
        if self.boson_channel_energy < 0:
            raise ValueError("boson_channel_energy must be >= 0")
        if self.coupling_g <= 0:
            raise ValueError("coupling_g must be positive")


@dataclass
class PairState:
    """Radial relative profile of the pair plus the boson amplitude."""

    relative_profile: RadialProfile
    boson_amplitude: complex

    def norm_squared(self) -> float:
        from .radial import inner_product
        return float(np.real(inner_product(self.relative_profile,
                                           self.relative_profile))
                     + abs(self.boson_amplitude) ** 2)


def cm_coordinates(z_h, zbar_k):
    """(Z, z) = ((z_h + zbar_k)/2, z_h - zbar_k)."""
    z_h = np.asarray(z_h, dtype=float)
    zbar_k = np.asarray(zbar_k, dtype=float)
    return 0.5 * (z_h + zbar_k), z_h - zbar_k


def particle_coordinates(Z, z):
    """Inverse of cm_coordinates."""
    Z = np.asarray(Z, dtype=float)
    z = np.asarray(z, dtype=float)
    return Z + 0.5 * z, Z - 0.5 * z


@dataclass(frozen=True)
class GaussianTerm6:
    """amplitude * exp(-(u - center)^T quad (u - center)) on R^6.

    quad must be symmetric positive semidefinite; closed-form gradient and
    Hessian make the chain-rule identity checkable without any numerics.
    """

    amplitude: complex
    center: np.ndarray
    quad: np.ndarray

    def value(self, u):
        d = np.asarray(u, float) - self.center
        return self.amplitude * np.exp(-d @ self.quad @ d)

    def hessian(self, u):
        d = np.asarray(u, float) - self.center
        qd = self.quad @ d
        v = self.value(u)
        return v * (4.0 * np.outer(qd, qd) - 2.0 * self.quad)


def gaussian6(amplitude, center, quad) -> GaussianTerm6:
    center = np.asarray(center, dtype=float).reshape(6)
    quad = np.asarray(quad, dtype=float).reshape(6, 6)
    if not np.allclose(quad, quad.T):
        raise ValueError("quadratic form must be symmetric")
    return GaussianTerm6(complex(amplitude), center, 0.5 * (quad + quad.T))


# u = T v with v = (Z, z):  z_h = Z + z/2, zbar_k = Z - z/2
_I3 = np.eye(3)
_T = np.block([[_I3, 0.5 * _I3], [_I3, -0.5 * _I3]])
_T_INV = np.block([[0.5 * _I3, 0.5 * _I3], [_I3, -_I3]])


def relative_kinetic_identity(terms, sample_points) -> float:
    """Max pointwise residual of the center-of-mass kinetic identity.

    Left side: (1/4)(grad_h - grad_k)^2 f from the Hessian in particle
    coordinates.  Right side: the relative Laplacian of the same Gaussian
    re-parameterized in (Z, z), i.e. the trace of the z-block of the
    transformed Hessian.  Both are closed forms; the identity is exact, so
    the residual is rounding only.
    """
    if isinstance(terms, GaussianTerm6):
        terms = [terms]
    worst = 0.0
    for u in np.atleast_2d(np.asarray(sample_points, dtype=float)):
        lhs = 0.0 + 0.0j
        rhs = 0.0 + 0.0j
        v = _T_INV @ u
        for t in terms:
            hess = t.hessian(u)
            block = hess[:3, :3] - 2.0 * hess[:3, 3:] + hess[3:, 3:]
            lhs += 0.25 * np.trace(block)
            t_cm = GaussianTerm6(t.amplitude, _T_INV @ t.center,
                                 _T.T @ t.quad @ _T)
            rhs += np.trace(t_cm.hessian(v)[3:, 3:])
        worst = max(worst, abs(lhs - rhs))
    return worst


def toy_equivalent_params(params: PairParams) -> toy.ToyParams:
    return toy.ToyParams(mass_m=params.fermion_mass / 2.0,
                         energy_e=params.boson_channel_energy,
                         coupling_g=params.coupling_g)


def assemble_pair(params: PairParams, grid: RadialGrid) -> AssembledSystem:
    """Assemble through the single-source path under the equivalence map."""
    system = toy.assemble(toy_equivalent_params(params), grid)
    system.params = params
    system.channel_labels = ["p_pair", "p_boson"]
    system.meta = {"model": "pair"}
    return system


def constraint_embed(profile: RadialProfile, params: PairParams) -> PairState:
    """Attach the boson amplitude demanded by chi(0) = amplitude."""
    from .radial import boundary_data
    return PairState(relative_profile=profile,
                     boson_amplitude=boundary_data(profile).value_b)


def constraint_residual(state: PairState) -> float:
    from .radial import boundary_data
    return abs(state.boson_amplitude
               - boundary_data(state.relative_profile).value_b)


def state_to_dofs(system: AssembledSystem, state: PairState):
    from .system import project_to_dofs
    full = np.concatenate([state.relative_profile.values,
                           [state.boson_amplitude]])
    return project_to_dofs(system, full)


def dofs_to_state(system: AssembledSystem, dofs: np.ndarray) -> PairState:
    full = system.embed @ dofs
    n = system.grid.n_nodes
    return PairState(relative_profile=RadialProfile(system.grid, full[:n]),
                     boson_amplitude=complex(full[n]))


def pure_boson_dofs(system: AssembledSystem) -> np.ndarray:
    """Unit state carried entirely by the boson amplitude channel."""
    x = np.zeros(system.n_dofs, dtype=np.complex128)
    x[0] = 1.0 / np.sqrt(system.mass_diag[0])
    return x


def annihilation_dynamics(system: AssembledSystem, initial, dt: float,
                          n_steps: int, store_states: bool = False):
    """Midpoint trajectory with columns p_pair, p_boson, norm."""
    if isinstance(initial, PairState):
        dofs, loss = state_to_dofs(system, initial)
    else:
        dofs = np.asarray(initial, dtype=np.complex128)
        loss = 0.0
    traj = evolve_dofs(system, dofs, dt, n_steps, store_states=store_states)
    traj.projection_loss = loss
    if loss > 1e-6:
        traj.warnings.append(
            f"initial state projection lost {loss:.3e} of its norm")
    return traj
