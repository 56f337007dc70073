"""Assembled Hermitian pencils and the machinery every model shares.

A model assembles two real symmetric matrices on a constrained nodal basis:
the Hamiltonian form H and the positive-definite mass form M (the Hilbert
pairing).  Constraints (interior boundary conditions tying a sector's r=0
slices to the sector below, Dirichlet truncation at r_max) are encoded in a
sparse embedding E from the free coefficients into the raw sector arrays, so
every form is a pullback  E^T (block form) E  and Hermiticity is exact, not
a cancellation.

The propagator is the implicit midpoint rule on the pencil (M, H),

    (M + i dt/2 H) x_{k+1} = (M - i dt/2 H) x_k,

which conserves the M-norm identically for Hermitian H, M and is reversed
exactly by stepping with -dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ZeroNormError(ValueError):
    """Raised when probabilities are requested for a zero state."""


class EigensolverError(RuntimeError):
    """Raised when a generalized eigensolve misses its residual target."""


class AssemblyError(RuntimeError):
    """Raised for degenerate constrained bases (non-PD mass)."""


@dataclass
class AssembledSystem:
    """Hermitian stiffness/mass pair on a constrained basis.

    hamiltonian, mass_matrix: real symmetric scipy.sparse matrices, exactly
        equal to their transposes entrywise.
    interaction_block: positive semidefinite matrix G; the symmetrized
        interaction quadratic form (per unit coupling) is -<x, G x>.
    embed: sparse map from free coefficients to the concatenated raw
        coordinates (profile nodes plus amplitudes); encodes the boundary
        conditions and the Dirichlet wall.
    full_weights: Hilbert weights of the raw coordinates, so that
        M = embed^T diag(full_weights) embed.
    channel_weights: per reporting channel (sector), the diagonal of its
        share of M; channels partition the norm.
    channel_labels: column names used in trajectory exports.
    """

    hamiltonian: sp.csr_matrix
    mass_matrix: sp.csr_matrix
    interaction_block: sp.csr_matrix
    params: object
    grid: object
    embed: sp.csr_matrix
    full_weights: np.ndarray
    channel_weights: list
    channel_labels: list
    meta: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def mass_diag(self) -> np.ndarray:
        return np.asarray(self.mass_matrix.diagonal())


def pullback(factor: sp.spmatrix, embed: sp.spmatrix) -> sp.csr_matrix:
    """(F E)^T (F E) for a real factor F; exactly symmetric entrywise."""
    fe = (factor @ embed).tocsr()
    fe.sort_indices()
    out = (fe.T @ fe).tocsr()
    out.sort_indices()
    return out


def mass_from_embedding(embed: sp.csr_matrix,
                        full_weights: np.ndarray) -> sp.csr_matrix:
    w = sp.diags(full_weights)
    out = (embed.T @ (w @ embed)).tocsr()
    out.sort_indices()
    return out


def check_mass_positive(mass: sp.spmatrix):
    d = np.asarray(mass.diagonal())
    off = mass - sp.diags(d)
    if off.nnz and np.max(np.abs(off.data)) > 0:
        raise AssemblyError("mass matrix is not diagonal on this basis")
    if np.any(d <= 0):
        raise AssemblyError("mass matrix is not positive definite; "
                            "the constrained basis is rank deficient")


def hermiticity_defect(matrix) -> float:
    """max |A - A^T| entrywise; zero for every assembled system."""
    if sp.issparse(matrix):
        d = (matrix - matrix.T).tocoo()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0
    a = np.asarray(matrix)
    return float(np.max(np.abs(a - a.T))) if a.size else 0.0


def lowest_eigenpairs_dofs(system: AssembledSystem, k: int,
                           residual_tol: float = 1e-8):
    """k smallest eigenpairs of H x = lam M x, mass-orthonormal, ascending.

    Dense path below 2000 coefficients, shift-invert Lanczos above.  The
    relative residual of every pair is verified against ``residual_tol``.
    """
    n = system.n_dofs
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside 1..{n}")
    H = system.hamiltonian
    M = system.mass_matrix
    if n <= 2000:
        vals, vecs = sla.eigh(H.toarray(), M.toarray(),
                              subset_by_index=[0, k - 1])
    else:
        d = system.mass_diag
        s = 1.0 / np.sqrt(d)
        Hs = sp.diags(s) @ H @ sp.diags(s)
        try:
            vals, vecs = spla.eigsh(Hs.tocsc(), k=k, sigma=-1e-8, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Lanczos failed to converge: {exc}") from exc
        order = np.argsort(vals)
        vals = vals[order]
        vecs = s[:, None] * vecs[:, order]
    for j in range(k):
        v = vecs[:, j]
        r = H @ v - vals[j] * (M @ v)
        hv = np.linalg.norm(H @ v)
        if hv > 0 and np.linalg.norm(r) > residual_tol * hv:
            raise EigensolverError(
                f"eigenpair {j} residual {np.linalg.norm(r):.3e} exceeds "
                f"{residual_tol:.1e} * ||Hv||")
    return np.asarray(vals, dtype=float), vecs


def project_to_dofs(system: AssembledSystem, full_coords: np.ndarray):
    """Mass-orthogonal projection of raw coordinates onto the constrained
    basis.  Returns (dofs, relative norm loss)."""
    w = system.full_weights
    rhs = system.embed.T @ (w * full_coords)
    dofs = rhs / system.mass_diag
    total = float(np.real(np.sum(w * np.abs(full_coords) ** 2)))
    if total == 0.0:
        return dofs, 0.0
    kept = float(np.real(np.vdot(dofs, system.mass_matrix @ dofs)))
    loss = max(0.0, 1.0 - kept / total)
    return dofs, loss


def mass_norm(system: AssembledSystem, dofs: np.ndarray) -> float:
    return float(np.sqrt(np.real(np.vdot(dofs, system.mass_matrix @ dofs))))


def channel_probabilities(system: AssembledSystem,
                          dofs: np.ndarray) -> np.ndarray:
    """Norm fractions per channel.  The last channel is reported as the
    complement of the others so every row sums to one exactly."""
    parts = np.array([float(np.real(np.sum(w * np.abs(dofs) ** 2)))
                      for w in system.channel_weights])
    total = parts.sum()
    if total <= 0.0:
        raise ZeroNormError("state has zero norm")
    probs = parts / total
    probs[-1] = 1.0 - float(np.sum(probs[:-1]))
    return probs


@dataclass
class Trajectory:
    """Observable record of one propagation.

    columns maps column name -> array over steps (including step 0); the
    label order matches the model's CSV contract.
    """

    times: np.ndarray
    columns: dict
    labels: list
    initial_dofs: np.ndarray
    final_dofs: np.ndarray
    states: list = None
    projection_loss: float = 0.0
    warnings: list = field(default_factory=list)

    def norm_drift(self) -> float:
        norms = self.columns["norm"]
        return float(np.max(np.abs(norms - norms[0])))


class MidpointPropagator:
    """Factorized implicit-midpoint stepper for one (M, H, dt)."""

    def __init__(self, system: AssembledSystem, dt: float):
        self.system = system
        self.dt = float(dt)
        H = system.hamiltonian.tocsc()
        M = system.mass_matrix.tocsc()
        A = (M + 0.5j * dt * H).tocsc()
        self._B = (M - 0.5j * dt * H).tocsr()
        n = system.n_dofs
        if n <= 600:
            self._lu = sla.lu_factor(A.toarray())
            self._dense = True
        else:
            self._lu = spla.splu(A)
            self._dense = False

    def step(self, x: np.ndarray) -> np.ndarray:
        rhs = self._B @ x
        if self._dense:
            return sla.lu_solve(self._lu, rhs)
        return self._lu.solve(rhs)


def default_dt(grid) -> float:
    return grid.r_max / (grid.n_nodes * 10.0)


def evolve_dofs(system: AssembledSystem, dofs0: np.ndarray, dt: float,
                n_steps: int, store_states: bool = False) -> Trajectory:
    """Propagate free coefficients and record channel probabilities,
    expected channel index, and the M-norm at every step."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    prop = MidpointPropagator(system, dt)
    labels = list(system.channel_labels)
    x = np.asarray(dofs0, dtype=np.complex128).copy()
    probs = np.empty((n_steps + 1, len(labels)))
    norms = np.empty(n_steps + 1)
    states = [x.copy()] if store_states else None
    probs[0] = channel_probabilities(system, x)
    norms[0] = mass_norm(system, x)
    for k in range(1, n_steps + 1):
        x = prop.step(x)
        probs[k] = channel_probabilities(system, x)
        norms[k] = mass_norm(system, x)
        if store_states:
            states.append(x.copy())
    columns = {lab: probs[:, j] for j, lab in enumerate(labels)}
    columns["norm"] = norms
    return Trajectory(times=dt * np.arange(n_steps + 1), columns=columns,
                      labels=labels + ["norm"], initial_dofs=dofs0.copy(),
                      final_dofs=x, states=states)
