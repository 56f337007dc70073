"""Analytic 3D test functions: Gaussian sums plus per-center cusp terms.

Every term is radial about its own center,

    smooth:  A * exp(-a s^2)
    cusp:    b * s * exp(-a s^2),        s = ||x - center||,

so the function is continuous everywhere, smooth away from cusp centers,
and every sphere average has a closed form.  For a term with radial profile
F about c, the average over the sphere of radius r about y (d = ||y - c||)
is

    d = 0:   F(r)
    d > 0:   [Phi(r + d) - Phi(|r - d|)] / (2 r d),   Phi(s) = int_0^s t F(t) dt,

with Phi elementary (an erf enters for cusp terms).  First and second
radial derivatives of the averages are also closed forms; they feed the
excised-bracket quadratures, which never differentiate numerically.

Averages of cusp terms about a foreign center are C^2 but not C^3 at
r = d (the sphere grazing the cusp); ``kink_radii`` reports these radii so
quadrature panels can split there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .radial import FOUR_PI

_CENTER_ATOL = 1e-12


@dataclass(frozen=True)
class SmoothTerm:
    amplitude: complex
    width: float
    center: tuple

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")

    def profile(self, s):
        return self.amplitude * np.exp(-self.width * np.asarray(s) ** 2)

    def profile_d1(self, s):
        s = np.asarray(s)
        return -2.0 * self.width * s * self.profile(s)

    def profile_d2(self, s):
        s = np.asarray(s)
        a = self.width
        return self.amplitude * (4 * a * a * s * s - 2 * a) * np.exp(-a * s * s)

    def phi_integral(self, s):
        """int_0^s t F(t) dt; even in s."""
        a = self.width
        return self.amplitude * (1.0 - np.exp(-a * np.asarray(s) ** 2)) / (2 * a)


@dataclass(frozen=True)
class CuspTerm:
    center: tuple
    slope: complex
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")

    def profile(self, s):
        s = np.asarray(s)
        return self.slope * s * np.exp(-self.width * s**2)

    def profile_d1(self, s):
        s = np.asarray(s)
        a = self.width
        return self.slope * (1.0 - 2.0 * a * s * s) * np.exp(-a * s * s)

    def profile_d2(self, s):
        s = np.asarray(s)
        a = self.width
        return self.slope * (4 * a * a * s**3 - 6 * a * s) * np.exp(-a * s * s)

    def phi_integral(self, s):
        """int_0^s t F(t) dt; odd in s."""
        s = np.asarray(s)
        a = self.width
        return self.slope * (-s * np.exp(-a * s * s) / (2 * a)
                             + np.sqrt(np.pi) / (4 * a**1.5)
                             * erf(np.sqrt(a) * s))


@dataclass(frozen=True)
class GaussianCuspFunction:
    smooth_terms: tuple = field(default_factory=tuple)
    cusp_terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "smooth_terms", tuple(self.smooth_terms))
        object.__setattr__(self, "cusp_terms", tuple(self.cusp_terms))

    @property
    def terms(self):
        return self.smooth_terms + self.cusp_terms

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        out = np.zeros(pts.shape[0], dtype=np.complex128)
        for t in self.terms:
            s = np.linalg.norm(pts - np.asarray(t.center), axis=1)
            out += t.profile(s)
        return out[0] if x.ndim == 1 else out

    def laplacian(self, x):
        """Pointwise Laplacian away from cusp centers: (s F)'' / s per term."""
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        out = np.zeros(pts.shape[0], dtype=np.complex128)
        for t in self.terms:
            s = np.linalg.norm(pts - np.asarray(t.center), axis=1)
            out += t.profile_d2(s) + 2.0 * t.profile_d1(s) / s
        return out[0] if x.ndim == 1 else out

    def max_decay_width(self) -> float:
        return min(t.width for t in self.terms)

    def centers(self):
        return [np.asarray(t.center, dtype=float) for t in self.terms]


def gaussian(amplitude, width, center=(0.0, 0.0, 0.0)) -> GaussianCuspFunction:
    return GaussianCuspFunction(
        smooth_terms=(SmoothTerm(complex(amplitude), float(width),
                                 tuple(float(c) for c in center)),))


def _term_average(term, d, r):
    """Sphere average of one term about a point at distance d, radius r > 0.

    Returns (value, d/dr, d2/dr2) arrays over r.
    """
    r = np.asarray(r, dtype=float)
    if d < _CENTER_ATOL:
        return term.profile(r), term.profile_d1(r), term.profile_d2(r)
    up = r + d
    um = r - d
    aum = np.abs(um)
    T = term.phi_integral(up) - term.phi_integral(aum)
    T1 = up * term.profile(up) - um * term.profile(aum)
    T2 = (term.profile(up) + up * term.profile_d1(up)
          - term.profile(aum) - aum * term.profile_d1(aum))
    sa = T / (2.0 * r * d)
    sa1 = T1 / (2.0 * r * d) - T / (2.0 * r * r * d)
    sa2 = (T2 / (2.0 * r * d) - T1 / (r * r * d) + T / (r**3 * d))
    return sa, sa1, sa2


def sphere_average(fn: GaussianCuspFunction, center, radius: float) -> complex:
    """Average of fn over the sphere of given radius about center.

    radius = 0 returns the point value (the averages are continuous)."""
    center = np.asarray(center, dtype=float)
    if radius == 0.0:
        return complex(fn(center))
    out = 0.0 + 0.0j
    for t in fn.terms:
        d = float(np.linalg.norm(center - np.asarray(t.center)))
        sa, _, _ = _term_average(t, d, np.array([radius]))
        out += complex(sa[0])
    return out


def sphere_average_derivatives(fn: GaussianCuspFunction, center, radii):
    """(SA, SA', SA'') of fn about center at an array of radii > 0."""
    center = np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    sa = np.zeros(radii.shape, dtype=np.complex128)
    sa1 = np.zeros_like(sa)
    sa2 = np.zeros_like(sa)
    for t in fn.terms:
        d = float(np.linalg.norm(center - np.asarray(t.center)))
        v, v1, v2 = _term_average(t, d, radii)
        sa += v
        sa1 += v1
        sa2 += v2
    return sa, sa1, sa2


def kink_radii(fn: GaussianCuspFunction, center) -> list:
    """Radii where the sphere average about center loses C^3 smoothness."""
    center = np.asarray(center, dtype=float)
    out = []
    for t in fn.cusp_terms:
        d = float(np.linalg.norm(center - np.asarray(t.center)))
        if d > _CENTER_ATOL:
            out.append(d)
    return sorted(set(out))


def boundary_data_3d(fn: GaussianCuspFunction, center):
    """(b_value, c_value) about a center.

    b_value is the point value.  c_value = 4 pi * SA'(0) picks up exactly
    the cusp slopes seated at this center; every smooth contribution and
    every foreign-centered term averages to an even function of r.
    """
    center = np.asarray(center, dtype=float)
    b_value = complex(fn(center))
    slopes = sum((t.slope for t in fn.cusp_terms
                  if np.linalg.norm(np.asarray(t.center) - center)
                  <= _CENTER_ATOL), start=0.0 + 0.0j)
    return b_value, FOUR_PI * slopes


def angular_average(fn, center, radius: float, n_polar: int = 24) -> complex:
    """Brute sphere average by Gauss-Legendre in cos(theta) times a uniform
    azimuthal grid; the independent oracle for the closed forms above.
    Accepts any callable on (N, 3) points."""
    center = np.asarray(center, dtype=float)
    u, w = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(2 * n_polar) + 0.5) * (np.pi / n_polar)
    st = np.sqrt(1.0 - u**2)
    dirs = np.concatenate([
        np.stack([np.outer(st, np.cos(phi)).ravel(),
                  np.outer(st, np.sin(phi)).ravel(),
                  np.outer(u, np.ones_like(phi)).ravel()], axis=1)])
    vals = np.asarray(fn(center + radius * dirs))
    weights = np.repeat(w, phi.size) / (2.0 * phi.size)
    return complex(np.sum(weights * vals))


@dataclass(frozen=True)
class SceneConfig:
    """Fermion centers and their charges."""

    fermion_centers: tuple
    charges: tuple

    def __post_init__(self):
        centers = tuple(tuple(float(c) for c in y)
                        for y in self.fermion_centers)
        charges = tuple(int(q) for q in self.charges)
        if len(centers) != len(charges):
            raise ValueError("one charge per center required")
        if any(q not in (-1, 1) for q in charges):
            raise ValueError("charges must be +1 or -1")
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                if np.linalg.norm(np.subtract(centers[i], centers[j])) \
                        < _CENTER_ATOL:
                    raise ValueError("fermion centers must be distinct")
        object.__setattr__(self, "fermion_centers", centers)
        object.__setattr__(self, "charges", charges)

    @property
    def n_centers(self) -> int:
        return len(self.fermion_centers)

    def center(self, k: int) -> np.ndarray:
        return np.asarray(self.fermion_centers[k], dtype=float)

    def min_separation(self) -> float:
        c = [self.center(k) for k in range(self.n_centers)]
        if len(c) < 2:
            return np.inf
        return min(np.linalg.norm(c[i] - c[j])
                   for i in range(len(c)) for j in range(i + 1, len(c)))
