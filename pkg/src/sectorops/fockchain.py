"""Truncated boson ladder around a source frozen at the origin.

Sector n holds a permutation-symmetric n-coordinate radial function
phi_n(r_1..r_n); sector 0 is a single amplitude.  Interior boundary
conditions identify each r_i = 0 slice of sector n with sector n-1 (corners
with several vanishing radii chain down transitively), and a homogeneous
Dirichlet wall truncates every coordinate at r_max.  The free coefficients
are therefore the interior nodal values of every sector plus the sector-0
amplitude, and the n-boson norm carries the weight (4 pi)^n prod w_j r_j^2.

The Hamiltonian is the emission/absorption ladder restricted to this
reduction: per sector, a kinetic term for every coordinate, an energy
offset (source energy plus an optional per-boson offset), and the
symmetrized interaction whose constrained form contributes
-(coupling) * sum over axes of the first-derivative pairing on one
coordinate.  On symmetric states the axis sum collapses to n times one
axis, which is exactly the boson-number weighting of the inter-sector
coupling.  Everything is pulled back through the constraint embedding, so
the assembled matrix is symmetric entrywise and couples sector n only to
n-1, n, n+1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .radial import (FOUR_PI, RadialGrid, kinetic_edge_matrix,
                     lambda_edge_matrix, mass_weights)
from .system import (AssembledSystem, check_mass_positive, evolve_dofs,
                     mass_from_embedding, project_to_dofs, pullback)

MAX_SYMMETRIZE_DIM = 6
DEFAULT_DOF_BUDGET = 5_000_000


class BudgetError(ValueError):
    """Raised when the requested truncation exceeds the coefficient budget."""


@dataclass(frozen=True)
class FockChainParams:
    boson_mass: float
    source_energy: float
    coupling_h: float
    n_max: int
    boson_energy: float = 0.0

    def __post_init__(self):
        if self.boson_mass <= 0:
            raise ValueError("boson_mass must be positive")
        if self.source_energy < 0:
            raise ValueError("source_energy must be >= 0")
        if self.coupling_h <= 0:
            raise ValueError("coupling_h must be positive")
        if self.boson_energy < 0:
            raise ValueError("boson_energy must be >= 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


@dataclass
class FockChainState:
    """sectors[n] is the full n-coordinate array (sector 0 a scalar)."""

    grid: RadialGrid
    sectors: list

    def __post_init__(self):
        n_nodes = self.grid.n_nodes
        fixed = [np.complex128(self.sectors[0])]
        for n, arr in enumerate(self.sectors[1:], start=1):
            a = np.asarray(arr, dtype=np.complex128)
            if a.shape != (n_nodes,) * n:
                raise ValueError(f"sector {n} has shape {a.shape}, expected "
                                 f"{(n_nodes,) * n}")
            fixed.append(a)
        self.sectors = fixed

    @property
    def n_max(self) -> int:
        return len(self.sectors) - 1

    def sector_norms_squared(self) -> np.ndarray:
        out = [abs(self.sectors[0]) ** 2]
        w1 = mass_weights(self.grid)
        for n in range(1, self.n_max + 1):
            w = _tensor_weights(w1, n).reshape(self.sectors[n].shape)
            out.append(float(np.sum(w * np.abs(self.sectors[n]) ** 2)))
        return np.array(out)

    def norm_squared(self) -> float:
        return float(self.sector_norms_squared().sum())


def _tensor_weights(w1: np.ndarray, n: int) -> np.ndarray:
    w = w1
    for _ in range(n - 1):
        w = np.multiply.outer(w, w1)
    return w.ravel()


def is_permutation_symmetric(arr: np.ndarray, atol: float = 0.0) -> bool:
    a = np.asarray(arr)
    for k in range(a.ndim - 1):
        if not np.allclose(a, np.swapaxes(a, k, k + 1), rtol=0.0, atol=atol):
            return False
    return True


def symmetrize(arr: np.ndarray) -> np.ndarray:
    """Average over all axis permutations.

    The result is assigned per index orbit (every permutation of an index
    tuple reads the same stored float), so the output is exactly symmetric
    and the map is exactly idempotent.  Already-symmetric arrays are
    returned unchanged.
    """
    a = np.asarray(arr, dtype=np.complex128)
    n = a.ndim
    if n > MAX_SYMMETRIZE_DIM:
        raise ValueError(f"refusing to symmetrize a {n}-dimensional array "
                         f"(limit {MAX_SYMMETRIZE_DIM})")
    if n <= 1:
        return a.copy()
    if all((a == np.swapaxes(a, k, k + 1)).all() for k in range(n - 1)):
        return a.copy()
    total = np.zeros_like(a)
    for perm in itertools.permutations(range(n)):
        total = total + np.transpose(a, perm)
    canon = tuple(np.sort(np.stack(np.indices(a.shape)), axis=0))
    return total[canon] / math.factorial(n)


def apply_boundary_b(state: FockChainState, n: int):
    """Evaluate one boson coordinate at the source: phi_n(0, r_2..r_n)."""
    if not 1 <= n <= state.n_max:
        raise ValueError(f"sector index {n} outside 1..{state.n_max}")
    return np.copy(state.sectors[n][0])


def apply_boundary_c(state: FockChainState, n: int):
    """4 pi times the first-coordinate radial slope at the source, by the
    one-sided quadratic fit through the first three slices."""
    if not 1 <= n <= state.n_max:
        raise ValueError(f"sector index {n} outside 1..{state.n_max}")
    a = state.sectors[n]
    h = state.grid.spacing
    return FOUR_PI * (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)


def _sector_shapes(grid: RadialGrid, n_max: int):
    return [(grid.n_nodes,) * n for n in range(n_max + 1)]


def _dof_counts(grid: RadialGrid, n_max: int):
    ni = grid.n_nodes - 2
    return [ni**n for n in range(n_max + 1)]


def _sector_embedding(grid: RadialGrid, n: int, dof_offsets) -> sp.csr_matrix:
    """Rows of the constraint embedding for sector n.

    A full index tuple maps to zero if any coordinate sits on the Dirichlet
    wall, and otherwise to the free coefficient of the sector obtained by
    deleting its vanishing coordinates (the transitive interior boundary
    identification).
    """
    N = grid.n_nodes
    ni = N - 2
    n_rows = N**n
    total_dofs = dof_offsets[-1]
    if n == 0:
        return sp.csr_matrix(([1.0], ([0], [dof_offsets[0]])),
                             shape=(1, total_dofs))
    idx = np.indices((N,) * n).reshape(n, -1)
    keep = ~(idx == N - 1).any(axis=0)
    rows_out, cols_out = [], []
    zero_mask = idx == 0
    for pattern in itertools.product([False, True], repeat=n):
        pat = np.array(pattern)
        sel = keep & (zero_mask == pat[:, None]).all(axis=0)
        if not sel.any():
            continue
        remaining = [k for k in range(n) if not pattern[k]]
        m = len(remaining)
        cols = np.full(sel.sum(), dof_offsets[m] if m else dof_offsets[0])
        if m:
            sub = idx[remaining][:, sel] - 1
            cols = dof_offsets[m] + np.ravel_multi_index(sub, (ni,) * m)
        rows_out.append(np.nonzero(sel)[0])
        cols_out.append(cols)
    rows = np.concatenate(rows_out)
    cols = np.concatenate(cols_out)
    e = sp.csr_matrix((np.ones(rows.size), (rows, cols)),
                      shape=(n_rows, total_dofs))
    e.sort_indices()
    return e


def _axis_factor(grid: RadialGrid, n: int, axis: int,
                 edge: sp.spmatrix, sqrt_w: np.ndarray) -> sp.csr_matrix:
    ops = [edge if j == axis else sp.diags(sqrt_w) for j in range(n)]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), ops)


def assemble_chain(params: FockChainParams, grid: RadialGrid,
                   dof_budget: int = DEFAULT_DOF_BUDGET) -> AssembledSystem:
    """Assemble the constrained ladder Hamiltonian and mass matrix."""
    counts = _dof_counts(grid, params.n_max)
    if sum(counts) > dof_budget:
        raise BudgetError(
            f"{sum(counts)} coefficients exceed the budget {dof_budget}; "
            "lower n_max or the grid size")
    dof_offsets = np.concatenate([[0], np.cumsum(counts)])
    total_dofs = int(dof_offsets[-1])

    w1 = mass_weights(grid)
    sqrt_w1 = np.sqrt(w1)
    kin_edge = kinetic_edge_matrix(grid)
    lam_edge = lambda_edge_matrix(grid)

    embeds = [_sector_embedding(grid, n, dof_offsets)
              for n in range(params.n_max + 1)]
    embed = sp.vstack(embeds, format="csr")
    full_weights = np.concatenate(
        [np.array([1.0])] + [_tensor_weights(w1, n)
                             for n in range(1, params.n_max + 1)])

    M = mass_from_embedding(embed, full_weights)
    check_mass_positive(M)

    K_total = sp.csr_matrix((total_dofs, total_dofs))
    G_total = sp.csr_matrix((total_dofs, total_dofs))
    for n in range(1, params.n_max + 1):
        for axis in range(n):
            K_total = K_total + pullback(
                _axis_factor(grid, n, axis, kin_edge, sqrt_w1), embeds[n])
            G_total = G_total + pullback(
                _axis_factor(grid, n, axis, lam_edge, sqrt_w1), embeds[n])

    channel_weights = []
    for n in range(params.n_max + 1):
        w_n = (np.array([1.0]) if n == 0 else _tensor_weights(w1, n))
        channel_weights.append(np.asarray(embeds[n].T @ w_n))

    energy_diag = params.source_energy * M.diagonal()
    if params.boson_energy != 0.0:
        boson_number_diag = sum(n * channel_weights[n]
                                for n in range(1, params.n_max + 1))
        energy_diag = energy_diag + params.boson_energy * boson_number_diag

    H = (1.0 / (2.0 * params.boson_mass)) * K_total + sp.diags(energy_diag)
    H = H + params.coupling_h * G_total

    dof_sectors = np.concatenate(
        [np.full(counts[n], n, dtype=int)
         for n in range(params.n_max + 1)])
    return AssembledSystem(
        hamiltonian=H.tocsr(), mass_matrix=M, interaction_block=G_total,
        params=params, grid=grid, embed=embed, full_weights=full_weights,
        channel_weights=channel_weights,
        channel_labels=[f"p_{n}" for n in range(params.n_max + 1)],
        meta={"model": "fock", "dof_sectors": dof_sectors,
              "dof_offsets": dof_offsets})


def state_to_full(state: FockChainState) -> np.ndarray:
    parts = [np.atleast_1d(np.asarray(state.sectors[0]))]
    parts += [state.sectors[n].ravel() for n in range(1, state.n_max + 1)]
    return np.concatenate(parts)


def dofs_to_state(system: AssembledSystem, dofs: np.ndarray) -> FockChainState:
    full = system.embed @ dofs
    n_max = system.params.n_max
    shapes = _sector_shapes(system.grid, n_max)
    sectors = [complex(full[0])]
    start = 1
    for n in range(1, n_max + 1):
        size = system.grid.n_nodes**n
        sectors.append(full[start:start + size].reshape(shapes[n]))
        start += size
    return FockChainState(system.grid, sectors)


def state_to_dofs(system: AssembledSystem, state: FockChainState):
    return project_to_dofs(system, state_to_full(state))


def vacuum_state(grid: RadialGrid, n_max: int) -> FockChainState:
    sectors = [1.0 + 0.0j]
    for n in range(1, n_max + 1):
        sectors.append(np.zeros((grid.n_nodes,) * n, dtype=np.complex128))
    return FockChainState(grid, sectors)


def vacuum_dofs(system: AssembledSystem) -> np.ndarray:
    x = np.zeros(system.n_dofs, dtype=np.complex128)
    x[0] = 1.0 / np.sqrt(system.mass_diag[0])
    return x


def evolve_chain(system: AssembledSystem, initial, dt: float, n_steps: int,
                 store_states: bool = False):
    """Midpoint trajectory with per-sector probabilities and the boson
    number expectation appended as its own column."""
    if isinstance(initial, FockChainState):
        dofs, loss = state_to_dofs(system, initial)
    else:
        dofs = np.asarray(initial, dtype=np.complex128)
        loss = 0.0
    traj = evolve_dofs(system, dofs, dt, n_steps, store_states=store_states)
    traj.projection_loss = loss
    if loss > 1e-6:
        traj.warnings.append(
            f"initial state projection lost {loss:.3e} of its norm")
    n_max = system.params.n_max
    expected = sum(n * traj.columns[f"p_{n}"] for n in range(1, n_max + 1))
    traj.columns["expected_boson_number"] = expected
    traj.labels = ([f"p_{n}" for n in range(n_max + 1)]
                   + ["expected_boson_number", "norm"])
    return traj
