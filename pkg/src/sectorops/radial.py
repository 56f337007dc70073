"""Radial grids and the discrete l=0 machinery.

Everything in the reduced models runs on sampled radial profiles phi(r) with
psi(x) = phi(||x||).  The l=0 spherical-harmonic coefficient is
psi_00 = sqrt(4*pi)*phi; we store phi and keep every 4*pi factor explicit so
that point-evaluation boundary conditions stay literal equalities.

The module provides

* uniform grids on [0, r_max] with composite Simpson quadrature
  (trapezoid fallback on the last panel when the panel count is odd),
* the weighted L2(R^3) pairing restricted to radial functions,
* the singular radial operator  phi -> phi''(r)/r^2  (pointwise stencil,
  testing only) and its Hermitian quadratic forms,
* one-sided boundary data (value and 4*pi * slope at r=0),
* the excised asymmetry bracket with Richardson extrapolation in the
  excision radius.

Hamiltonian assembly never touches the pointwise stencil: it goes through
the first-difference factor matrices below, which make every quadratic form
Hermitian (and sign-definite) by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FOUR_PI = 4.0 * np.pi
SQRT_FOUR_PI = float(np.sqrt(4.0 * np.pi))

#: excision radii eps_k = r_max * 0.1 * 2**-k used by discrete_asymmetry
LADDER_LEVELS = 7


class GridSizingError(ValueError):
    """Raised for non-positive extents or too few nodes."""


class GridMismatchError(ValueError):
    """Raised when two profiles do not share a grid."""


class ExtrapolationError(RuntimeError):
    """Raised when the excision ladder fails to contract."""


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes r_0 = 0 < r_1 < ... < r_{n-1} = r_max."""

    r_max: float
    n_nodes: int
    nodes: np.ndarray
    spacing: float

    def __eq__(self, other):
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return self.r_max == other.r_max and self.n_nodes == other.n_nodes


def make_grid(r_max: float, n_nodes: int) -> RadialGrid:
    """Build a uniform radial grid including both endpoints.

    Fewer than 8 nodes leaves the one-sided boundary stencils ill-posed,
    so that is rejected alongside non-positive extents.
    """
    if not np.isfinite(r_max) or r_max <= 0.0:
        raise GridSizingError(f"r_max must be positive, got {r_max}")
    if int(n_nodes) != n_nodes or n_nodes < 8:
        raise GridSizingError(f"n_nodes must be an integer >= 8, got {n_nodes}")
    n_nodes = int(n_nodes)
    nodes = np.linspace(0.0, r_max, n_nodes)
    nodes.setflags(write=False)
    return RadialGrid(r_max=float(r_max), n_nodes=n_nodes, nodes=nodes,
                      spacing=float(r_max) / (n_nodes - 1))


@dataclass
class RadialProfile:
    """Samples of phi(r) on a grid; values are complex."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.n_nodes,):
            raise GridMismatchError(
                f"profile has {vals.shape} values for a grid of "
                f"{self.grid.n_nodes} nodes")
        self.values = vals


@dataclass(frozen=True)
class BoundaryData:
    """The two scalars that drive inter-sector exchange.

    value_b is phi(0); deriv_c is 4*pi*phi'(0), i.e. the derivative at the
    origin of the surface integral of psi over growing spheres.
    """

    value_b: complex
    deriv_c: complex


def profile_from_callable(grid: RadialGrid, fn) -> RadialProfile:
    return RadialProfile(grid, np.asarray(fn(grid.nodes), dtype=np.complex128))


def has_compact_support(profile: RadialProfile, rel_tol: float = 1e-10) -> bool:
    """Numerical stand-in for compact support: negligible tail at r_max."""
    vals = np.abs(profile.values)
    peak = vals.max()
    if peak == 0.0:
        return True
    return vals[-1] <= rel_tol * peak


def simpson_weights(n_nodes: int, spacing: float) -> np.ndarray:
    """Composite Simpson weights; trapezoid on the last panel if the panel
    count is odd.  All weights are strictly positive."""
    if n_nodes < 2:
        raise GridSizingError("quadrature needs at least two nodes")
    w = np.zeros(n_nodes)
    panels = n_nodes - 1
    m = panels if panels % 2 == 0 else panels - 1
    if m > 0:
        w[0] += spacing / 3.0
        w[m] += spacing / 3.0
        w[1:m:2] += 4.0 * spacing / 3.0
        w[2:m:2] += 2.0 * spacing / 3.0
    if m < panels:
        w[-2] += spacing / 2.0
        w[-1] += spacing / 2.0
    return w


def mass_weights(grid: RadialGrid) -> np.ndarray:
    """Diagonal weights of the radial L2(R^3) pairing: 4*pi * w_j * r_j^2."""
    w = simpson_weights(grid.n_nodes, grid.spacing)
    return FOUR_PI * w * grid.nodes**2


def _check_same_grid(f: RadialProfile, g: RadialProfile):
    if f.grid != g.grid:
        raise GridMismatchError("profiles live on different grids")


def conj_pairing(a: np.ndarray, b: np.ndarray, weights=None) -> complex:
    """sum of weights * conj(a) * b in explicit real arithmetic.

    Split into real products so that pairing(a, b) == conj(pairing(b, a))
    and Im pairing(a, a) == 0 hold exactly; complex ufuncs may contract
    multiply-adds and break these identities at the last bit.
    """
    ar, ai = np.real(a), np.imag(a)
    br, bi = np.real(b), np.imag(b)
    re = ar * br + ai * bi
    im = ar * bi - ai * br
    if weights is not None:
        re = weights * re
        im = weights * im
    return complex(np.sum(re) + 1j * np.sum(im))


def inner_product(f: RadialProfile, g: RadialProfile) -> complex:
    """4*pi * integral of conj(f) g r^2 dr by composite Simpson."""
    _check_same_grid(f, g)
    return conj_pairing(f.values, g.values, weights=mass_weights(f.grid))


def apply_lambda(f: RadialProfile) -> RadialProfile:
    """Pointwise stencil for phi -> phi''/r^2.

    Central second differences at interior nodes (exact on polynomials up
    to degree 3), a shifted stencil at r_max, and a quadratic extrapolation
    through nodes 1..3 at the origin (O(spacing) there).  Testing only; the
    assembled Hamiltonians use the quadratic forms instead.
    """
    v = f.values
    h = f.grid.spacing
    r = f.grid.nodes
    out = np.empty_like(v)
    d2 = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    out[1:-1] = d2 / r[1:-1] ** 2
    d2_last = (v[-1] - 2.0 * v[-2] + v[-3]) / h**2
    out[-1] = d2_last / r[-1] ** 2
    out[0] = 3.0 * out[1] - 3.0 * out[2] + out[3]
    return RadialProfile(f.grid, out)


def boundary_data(f: RadialProfile) -> BoundaryData:
    """One-sided quadratic fit through nodes 0..2; exact on quadratics."""
    v = f.values
    h = f.grid.spacing
    value = complex(v[0])
    slope = complex((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h))
    return BoundaryData(value_b=value, deriv_c=FOUR_PI * slope)


def lambda_edge_matrix(grid: RadialGrid) -> sp.csr_matrix:
    """sqrt(4*pi*h) * D1 with D1 the cell first-difference operator.

    F = lambda_edge_matrix satisfies  F^T F = -(discrete Lambda_s form),
    i.e. the interaction quadratic form is  -||F phi||^2.
    """
    n = grid.n_nodes
    h = grid.spacing
    scale = np.sqrt(FOUR_PI * h) / h
    d = sp.diags([np.full(n - 1, -scale), np.full(n - 1, scale)],
                 offsets=[0, 1], shape=(n - 1, n))
    return d.tocsr()


def kinetic_edge_matrix(grid: RadialGrid) -> sp.csr_matrix:
    """sqrt(4*pi*h) * diag(r_mid) * D1; F^T F is the kinetic form matrix."""
    n = grid.n_nodes
    h = grid.spacing
    r_mid = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
    scale = np.sqrt(FOUR_PI * h) / h
    d = sp.diags([-scale * r_mid, scale * r_mid],
                 offsets=[0, 1], shape=(n - 1, n))
    return d.tocsr()


def lambda_form(f: RadialProfile, g: RadialProfile) -> complex:
    """Sesquilinear form of the symmetrized interaction operator on the
    constrained domain: -4*pi * integral of conj(f') g' dr.

    Assembled as -(F f)^H (F g), hence Hermitian entrywise and <= 0 on the
    diagonal by construction.
    """
    _check_same_grid(f, g)
    F = lambda_edge_matrix(f.grid)
    return -conj_pairing(F @ f.values, F @ g.values)


def kinetic_form(f: RadialProfile, g: RadialProfile) -> complex:
    """<f| -Laplacian |g> for radial functions: 4*pi * int conj(f') g' r^2 dr."""
    _check_same_grid(f, g)
    F = kinetic_edge_matrix(f.grid)
    return conj_pairing(F @ f.values, F @ g.values)


def default_ladder(scale: float, levels: int = LADDER_LEVELS) -> np.ndarray:
    """Excision radii eps_k = scale * 0.1 * 2**-k, k = 0..levels-1."""
    return scale * 0.1 * 0.5 ** np.arange(levels)


@dataclass
class RichardsonDiagnostics:
    """Contraction record of an excision ladder."""

    eps: np.ndarray
    estimates: np.ndarray
    extrapolants: np.ndarray
    diffs: np.ndarray = field(default=None)
    contracted: bool = True

    def __post_init__(self):
        if self.diffs is None:
            self.diffs = np.abs(np.diff(self.estimates))


def richardson_limit(eps, values, base_order: int = 1,
                     contraction: float = 1.5,
                     abs_floor: float = None):
    """Extrapolate ladder estimates to eps -> 0.

    Assumes an error expansion in integer powers of x = eps**base_order and
    runs Neville polynomial extrapolation in x to x = 0, which eliminates
    the powers one by one and copes with unevenly spaced ladders (node
    snapping).  The contraction diagnostic looks at the raw ladder
    differences: once above the noise floor they must shrink by at least
    ``contraction`` per level on (geometric) average.
    """
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if eps.size != vals.size or eps.size < 3:
        raise ValueError("need at least three distinct ladder levels")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("ladder radii must decrease strictly")

    x = eps**base_order
    tableau = vals.copy()
    for span in range(1, eps.size):
        num = (x[:-span] * tableau[1:] - x[span:] * tableau[:-1])
        tableau = num / (x[:-span] - x[span:])
    limit = complex(tableau[-1] if tableau.size else vals[-1])

    diffs = np.abs(np.diff(vals))
    scale = max(np.max(np.abs(vals)), abs(limit), 1.0)
    floor = abs_floor if abs_floor is not None else 1e-13 * scale
    live = diffs > floor
    contracted = True
    if np.count_nonzero(live) >= 2:
        d = diffs[live]
        ratios = d[:-1] / np.maximum(d[1:], 1e-300)
        contracted = bool(np.exp(np.mean(np.log(ratios))) >= contraction)
    diag = RichardsonDiagnostics(eps=eps, estimates=vals,
                                 extrapolants=np.array([limit]),
                                 contracted=contracted)
    return limit, diag


def discrete_asymmetry(f: RadialProfile, g: RadialProfile,
                       ladder=None) -> complex:
    """Excised bracket <f|Lambda g> - <Lambda f|g> extrapolated to eps -> 0.

    Quadrature omits all nodes with r < eps and the ladder estimates are
    Richardson-extrapolated with leading order 1 (the surface term behind
    the bracket is linear in the excision radius).  The limit approximates
    4*pi*(conj(f'(0)) g(0) - conj(f(0)) g'(0)).
    """
    _check_same_grid(f, g)
    grid = f.grid
    if ladder is None:
        ladder = default_ladder(grid.r_max)
    lf = apply_lambda(f).values
    lg = apply_lambda(g).values
    integrand = (np.conj(f.values) * lg - np.conj(lf) * g.values) * grid.nodes**2

    eff_eps = []
    estimates = []
    for eps in ladder:
        j0 = int(np.searchsorted(grid.nodes, eps, side="left"))
        j0 = max(j0, 1)
        if grid.n_nodes - j0 < 4:
            continue
        if eff_eps and grid.nodes[j0] == eff_eps[-1]:
            continue
        w = simpson_weights(grid.n_nodes - j0, grid.spacing)
        eff_eps.append(grid.nodes[j0])
        estimates.append(FOUR_PI * np.sum(w * integrand[j0:]))
    if len(eff_eps) < 3:
        raise ExtrapolationError("excision ladder collapsed onto too few "
                                 "distinct node cutoffs; refine the grid")
    limit, diag = richardson_limit(eff_eps, estimates, base_order=1)
    if not diag.contracted:
        raise ExtrapolationError(
            "excised bracket estimates do not contract along the ladder: "
            f"diffs={diag.diffs}")
    return limit


def write_profile_csv(path, profile: RadialProfile):
    """Serialize as three columns r, re, im."""
    data = np.column_stack([profile.grid.nodes,
                            profile.values.real,
                            profile.values.imag])
    header = "r,re,im"
    np.savetxt(path, data, delimiter=",", header=header, comments="")


def read_profile_csv(path) -> RadialProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    r = data[:, 0]
    n = r.size
    if n < 8:
        raise GridSizingError("profile file has fewer than 8 nodes")
    grid = make_grid(r[-1], n)
    if not np.allclose(grid.nodes, r, rtol=0, atol=1e-12 * max(r[-1], 1.0)):
        raise GridMismatchError("profile file nodes are not uniform from 0")
    return RadialProfile(grid, data[:, 1] + 1j * data[:, 2])
