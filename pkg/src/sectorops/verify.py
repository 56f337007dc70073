"""Identity certification suite.

Each verify_* function evaluates one operator identity numerically (the
excised bracket on the left, a closed-form boundary pairing on the right)
and emits report rows with absolute and relative errors against a pinned
tolerance.  ``run_suite`` drives a seeded randomized battery over scenes of
one or two fermion centers and aggregates the rows into a machine-readable
report.

Two closed forms coexist for the two-center cross bracket:

* the projector-aware form (sphere averages at the separation radius),
  exact for every test pair, and
* the point-value form, exact when the left function is radial about the
  first center and the right one about the second.

The battery's closed-form rows use center-attached pairs so both coincide;
the cancellation rows use a shared real test function, for which the
symmetrized pair bracket vanishes identically.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .brackets import (BracketResult, QuadratureSpec, QuadratureError,
                       corrected_cross_closed_form, excised_bracket,
                       m_pairing_closed_form, raw_cross_closed_form)
from .cuspfn import (CuspTerm, GaussianCuspFunction, SceneConfig, SmoothTerm,
                     boundary_data_3d)
from .radial import FOUR_PI

TOL_M_IDENTITY = 1e-5
TOL_SIGMA_IDENTITY = 1e-5
TOL_V_CLOSED = 1e-4
TOL_V_CANCEL = 1e-4
TOL_LAPLACIAN = 1e-6


@dataclass
class IdentityRow:
    """One certified identity instance."""

    identity: str
    scene: str
    lhs: complex
    rhs: complex
    tolerance: float
    mode: str = "rel"
    contracted: bool = True

    @property
    def abs_err(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_err(self) -> float:
        denom = max(abs(self.lhs), abs(self.rhs))
        return self.abs_err / denom if denom > 0 else 0.0

    @property
    def passed(self) -> bool:
        if not self.contracted:
            return False
        err = self.rel_err if self.mode == "rel" else self.abs_err
        if self.mode == "rel" and max(abs(self.lhs), abs(self.rhs)) < 1e-10:
            err = self.abs_err
        return err <= self.tolerance


def _scene_tag(scene: SceneConfig) -> str:
    qs = "".join("+" if q > 0 else "-" for q in scene.charges)
    if scene.n_centers == 1:
        return f"p=1 q={qs}"
    return f"p={scene.n_centers} q={qs} sep={scene.min_separation():.3f}"


def verify_m_identity(phi, psi, scene: SceneConfig,
                      quad: QuadratureSpec,
                      tolerance: float = TOL_M_IDENTITY) -> IdentityRow:
    """Excised bracket of the summed single-center operator against the
    boundary-data pairing, pointwise in the fermion positions."""
    rhs = m_pairing_closed_form(phi, psi, scene)
    try:
        res = excised_bracket(phi, psi, ("m_total",), scene, quad)
        lhs, contracted = res.value, res.contracted
    except QuadratureError as exc:
        lhs, contracted = np.nan, False
    return IdentityRow(identity="m-pairing", scene=_scene_tag(scene),
                       lhs=lhs, rhs=rhs, tolerance=tolerance,
                       contracted=contracted)


def verify_v_crossterm(phi, psi, scene: SceneConfig, quad: QuadratureSpec,
                       h: int = 0, k: int = 1,
                       tol_closed: float = TOL_V_CLOSED,
                       tol_cancel: float = TOL_V_CANCEL):
    """Two rows: the single cross bracket against its closed form, and the
    charge-weighted symmetrized sum against the prediction (zero whenever
    phi equals psi with real coefficients)."""
    y_h, y_k = scene.center(h), scene.center(k)
    cross_hk = excised_bracket(phi, psi, ("v_cross", h, k), scene, quad)
    cross_kh = excised_bracket(phi, psi, ("v_cross", k, h), scene, quad)
    closed_hk = corrected_cross_closed_form(phi, psi, y_h, y_k)
    closed_kh = corrected_cross_closed_form(phi, psi, y_k, y_h)
    qq = scene.charges[h] * scene.charges[k]
    row_closed = IdentityRow(
        identity="v-cross-closed-form", scene=_scene_tag(scene),
        lhs=cross_hk.value, rhs=closed_hk, tolerance=tol_closed,
        contracted=cross_hk.contracted)
    row_cancel = IdentityRow(
        identity="v-cancellation", scene=_scene_tag(scene),
        lhs=qq * (cross_hk.value + cross_kh.value),
        rhs=qq * (closed_hk + closed_kh),
        tolerance=tol_cancel, mode="abs",
        contracted=cross_hk.contracted and cross_kh.contracted)
    return row_closed, row_cancel


@dataclass(frozen=True)
class CmProductFunction:
    """Separable (Z, z) test function: Gaussian center-of-mass factor times
    a relative-coordinate cusp function about z = 0."""

    cm_amplitude: complex
    cm_width: float
    cm_center: tuple
    relative: GaussianCuspFunction

    def cm_overlap(self, other: "CmProductFunction") -> complex:
        a, b = self.cm_width, other.cm_width
        d2 = float(np.sum((np.asarray(self.cm_center)
                           - np.asarray(other.cm_center)) ** 2))
        return (np.conj(self.cm_amplitude) * other.cm_amplitude
                * (np.pi / (a + b)) ** 1.5 * np.exp(-a * b * d2 / (a + b)))


def _cm_overlap_quadrature(f: CmProductFunction, g: CmProductFunction,
                           half_width: float = 8.0, nodes: int = 14) -> complex:
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    breaks = np.array([-1.0, -0.45, -0.15, 0.15, 0.45, 1.0]) * half_width
    xs, ws = [], []
    for a, b in zip(breaks, breaks[1:]):
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
        ws.append(0.5 * (b - a) * wg)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()

    def gau(fn, pts):
        d2 = np.sum((pts - np.asarray(fn.cm_center)) ** 2, axis=1)
        return fn.cm_amplitude * np.exp(-fn.cm_width * d2)

    return complex(np.sum(W * np.conj(gau(f, pts)) * gau(g, pts)))


def verify_sigma_identity(phi: CmProductFunction, psi: CmProductFunction,
                          quad: QuadratureSpec,
                          tolerance: float = TOL_SIGMA_IDENTITY) -> IdentityRow:
    """Pair-annihilation asymmetry in center-of-mass coordinates.

    The relative factor carries the singular operator about z = 0, so the
    bracket factorizes into (CM overlap) times the single-center radial
    bracket; the right side is the same overlap times the boundary-data
    pairing.  Left side uses quadrature for both factors.
    """
    origin = SceneConfig(fermion_centers=((0.0, 0.0, 0.0),), charges=(1,))
    zres = excised_bracket(phi.relative, psi.relative, ("m", 0), origin, quad)
    overlap_q = _cm_overlap_quadrature(phi, psi)
    lhs = overlap_q * zres.value

    b_phi, c_phi = boundary_data_3d(phi.relative, (0.0, 0.0, 0.0))
    b_psi, c_psi = boundary_data_3d(psi.relative, (0.0, 0.0, 0.0))
    rhs = phi.cm_overlap(psi) * (np.conj(c_phi) * b_psi
                                 - np.conj(b_phi) * c_psi)
    return IdentityRow(identity="sigma-pairing", scene="cm-reduced",
                       lhs=lhs, rhs=complex(rhs), tolerance=tolerance,
                       contracted=zres.contracted)


def verify_laplacian_smoke(phi, psi, scene: SceneConfig,
                           quad: QuadratureSpec,
                           tolerance: float = TOL_LAPLACIAN) -> IdentityRow:
    """The plain Laplacian bracket vanishes on decaying functions."""
    res = excised_bracket(phi, psi, ("laplacian",), scene, quad)
    return IdentityRow(identity="laplacian-symmetric",
                       scene=_scene_tag(scene), lhs=res.value, rhs=0.0,
                       tolerance=tolerance, mode="abs",
                       contracted=res.contracted)


@dataclass
class VerificationReport:
    rows: list
    seed: int
    elapsed: float = 0.0
    injected_error: bool = False

    @property
    def n_failed(self) -> int:
        return sum(not r.passed for r in self.rows)

    @property
    def all_passed(self) -> bool:
        return self.n_failed == 0

    def summary(self) -> dict:
        return {"rows": len(self.rows), "failed": self.n_failed,
                "passed": self.all_passed, "seed": self.seed,
                "injected_error": self.injected_error}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["identity", "scene", "lhs_re", "lhs_im",
                             "rhs_re", "rhs_im", "abs_err", "rel_err",
                             "tolerance", "mode", "passed"])
            for r in self.rows:
                writer.writerow([r.identity, r.scene,
                                 repr(float(np.real(r.lhs))),
                                 repr(float(np.imag(r.lhs))),
                                 repr(float(np.real(r.rhs))),
                                 repr(float(np.imag(r.rhs))),
                                 repr(r.abs_err), repr(r.rel_err),
                                 repr(r.tolerance), r.mode,
                                 int(r.passed)])


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 20250811
    n_scenes: int = 12
    inject_error: bool = False
    tolerances: dict = field(default_factory=dict)


def _random_cusp_function(rng, centers, complex_coeffs=True,
                          extra_smooth=True) -> GaussianCuspFunction:
    smooth, cusps = [], []
    for c in centers:
        amp = rng.uniform(0.5, 1.5)
        if complex_coeffs:
            amp = amp * np.exp(1j * rng.uniform(0, 2 * np.pi))
        smooth.append(SmoothTerm(amp, rng.uniform(0.6, 1.3), tuple(c)))
        slope = rng.uniform(0.4, 1.6) * rng.choice([-1.0, 1.0])
        if complex_coeffs:
            slope = slope * np.exp(1j * rng.uniform(0, 2 * np.pi))
        cusps.append(CuspTerm(tuple(c), slope, rng.uniform(0.6, 1.3)))
    if extra_smooth:
        off = tuple(rng.uniform(-0.4, 0.4, size=3))
        smooth.append(SmoothTerm(rng.uniform(0.2, 0.6),
                                 rng.uniform(0.8, 1.4), off))
    return GaussianCuspFunction(smooth_terms=tuple(smooth),
                                cusp_terms=tuple(cusps))


def _center_attached(rng, center) -> GaussianCuspFunction:
    return GaussianCuspFunction(
        smooth_terms=(SmoothTerm(rng.uniform(0.5, 1.5),
                                 rng.uniform(0.6, 1.3), tuple(center)),),
        cusp_terms=(CuspTerm(tuple(center),
                             rng.uniform(0.4, 1.6) * rng.choice([-1.0, 1.0]),
                             rng.uniform(0.6, 1.3)),))


def _two_center_scene(rng, charges) -> SceneConfig:
    mid = rng.uniform(-0.3, 0.3, size=3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    sep = rng.uniform(1.0, 1.8)
    return SceneConfig(
        fermion_centers=(tuple(mid - 0.5 * sep * axis),
                         tuple(mid + 0.5 * sep * axis)),
        charges=charges)


def run_suite(config: SuiteConfig = SuiteConfig()) -> VerificationReport:
    """Randomized battery, deterministic for a given seed.

    Scenes cycle through single-center pairings, two-center pairings,
    cross-term checks (closed form on center-attached pairs plus the
    shared-function cancellation), and center-of-mass pair identities.
    ``inject_error`` perturbs every right-hand side by 1 percent as a
    harness self-test; the corresponding rows must then fail.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    tol = {"m": TOL_M_IDENTITY, "sigma": TOL_SIGMA_IDENTITY,
           "v_closed": TOL_V_CLOSED, "v_cancel": TOL_V_CANCEL}
    tol.update(config.tolerances)
    rows = []
    kinds = ["m1", "m2", "v", "sigma"]
    for i in range(config.n_scenes):
        kind = kinds[i % len(kinds)]
        if kind == "m1":
            center = tuple(rng.uniform(-0.4, 0.4, size=3))
            scene = SceneConfig(fermion_centers=(center,),
                                charges=(int(rng.choice([-1, 1])),))
            quad = QuadratureSpec.for_scene(scene)
            phi = _random_cusp_function(rng, [center])
            psi = _random_cusp_function(rng, [center])
            rows.append(verify_m_identity(phi, psi, scene, quad, tol["m"]))
        elif kind == "m2":
            scene = _two_center_scene(rng, (-1, 1))
            quad = QuadratureSpec.for_scene(scene)
            centers = [scene.center(0), scene.center(1)]
            phi = _random_cusp_function(rng, centers)
            psi = _random_cusp_function(rng, centers)
            rows.append(verify_m_identity(phi, psi, scene, quad, tol["m"]))
        elif kind == "v":
            charges = ((1, 1) if (i // len(kinds)) % 2 == 0 else (1, -1))
            scene = _two_center_scene(rng, charges)
            quad = QuadratureSpec.for_scene(scene)
            phi = _center_attached(rng, scene.center(0))
            psi = _center_attached(rng, scene.center(1))
            shared = _random_cusp_function(rng,
                                           [scene.center(0), scene.center(1)],
                                           complex_coeffs=False)
            closed, _ = verify_v_crossterm(phi, psi, scene, quad,
                                           tol_closed=tol["v_closed"],
                                           tol_cancel=tol["v_cancel"])
            _, cancel = verify_v_crossterm(shared, shared, scene, quad,
                                           tol_closed=tol["v_closed"],
                                           tol_cancel=tol["v_cancel"])
            rows.extend([closed, cancel])
        else:
            quad = QuadratureSpec(r_split=0.5)
            phi = CmProductFunction(
                cm_amplitude=rng.uniform(0.5, 1.5),
                cm_width=rng.uniform(0.6, 1.2),
                cm_center=tuple(rng.uniform(-0.3, 0.3, size=3)),
                relative=_random_cusp_function(rng, [(0.0, 0.0, 0.0)],
                                               extra_smooth=False))
            psi = CmProductFunction(
                cm_amplitude=rng.uniform(0.5, 1.5),
                cm_width=rng.uniform(0.6, 1.2),
                cm_center=tuple(rng.uniform(-0.3, 0.3, size=3)),
                relative=_random_cusp_function(rng, [(0.0, 0.0, 0.0)],
                                               extra_smooth=False))
            rows.append(verify_sigma_identity(phi, psi, quad, tol["sigma"]))
    if config.inject_error:
        for r in rows:
            r.rhs = r.rhs * 1.01 if r.rhs != 0 else 0.05 * max(abs(r.lhs), 1.0)
            r.scene += " [self-test]"
    return VerificationReport(rows=rows, seed=config.seed,
                              elapsed=time.perf_counter() - t0,
                              injected_error=config.inject_error)
