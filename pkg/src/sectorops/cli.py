"""Batch front end: verify | spectrum | evolve | convergence.

Each subcommand reads a single JSON config, validates everything up front
(no output file is touched on a config error), computes, and then writes
its delimited data files, one PNG figure per report, and a run-metadata
JSON.  Floats are serialized with repr(), so identical configs and seeds
reproduce byte-identical data files; the metadata file additionally
records wall-clock timings and is exempt from that guarantee.

Exit codes: 0 success, 1 scientific failure (a failed identity row or a
violated run gate), 2 usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, fockchain, pair, toy
from .radial import (GridSizingError, RadialProfile, make_grid,
                     write_profile_csv)
from .system import default_dt, lowest_eigenpairs_dofs, mass_norm
from .verify import SuiteConfig, run_suite

EXIT_OK = 0
EXIT_SCIENTIFIC = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid or missing configuration fields."""


CONFIG_REFERENCE = """\
sectorops configuration reference
=================================

Common flags: --config PATH (required), --out DIR (required),
--seed N (overrides config seed), --threads N (advisory; results are
deterministic regardless of thread count).

verify
------
{
  "n_scenes": 12,          # randomized battery size
  "seed": 20250811,        # RNG seed (overridden by --seed)
  "inject_error": false    # self-test mode: perturb every rhs by 1%
}
Outputs: verify_report.csv, verify_report.png, run_metadata.json.
Exit 1 if any identity row fails.

spectrum
--------
{
  "model": "toy",                          # toy | fock | pair
  "grid": {"r_max": 10.0, "n_nodes": 129},
  "params": { ... model parameters ... },
  "k": 5,                                  # number of lowest eigenpairs
  "write_eigenstates": false               # toy/pair only
}
Model parameters:
  toy:  mass_m, energy_e, coupling_g, lambda_scale (default sqrt(4 pi)),
        point_coupling_mu (default 0)
  fock: boson_mass, source_energy, coupling_h, n_max, boson_energy (0)
  pair: fermion_mass, boson_channel_energy, coupling_g
Outputs: spectrum.csv (eigenindex,eigenvalue; model and grid tagged in a
header comment), spectrum.png, optional eigenstate_###.csv profiles.

evolve
------
{
  "model": "toy",
  "grid": {"r_max": 10.0, "n_nodes": 129},
  "params": { ... },
  "dt": null,              # default r_max / (n_nodes * 10)
  "n_steps": 2000,
  "initial": {"kind": "pure_amplitude"},
  "reverse_check": false   # also run backward; gate on 1e-8 recovery
}
Initial kinds: toy/pair: "pure_amplitude" (the unit state carried by the
source/boson amplitude; aliases "pure_source", "pure_boson") or
"gaussian_profile" with "width".  fock: "vacuum" or "one_boson" with
"width".  Initial states are normalized to unit norm.
Outputs: trajectory.csv (per-model probability columns plus norm),
trajectory.png.  Exit 1 if reverse_check exceeds its gate.

convergence
-----------
{
  "model": "toy",
  "r_max": 10.0,
  "grid_nodes": [65, 129, 257],   # >= 3 strictly increasing levels
  "params": { ... },
  "observable": "lowest_eigenvalue"
}
Outputs: convergence.csv (n_nodes,observable,value,observed_order; the
order column fills once three levels are available), convergence.png.
"""


def _fail_config(msg: str):
    raise ConfigError(msg)


def _require(cfg: dict, field: str, where: str):
    if field not in cfg:
        _fail_config(f"missing field '{field}' in {where} config")
    return cfg[field]


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        _fail_config(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail_config(f"malformed config {path}: line {exc.lineno}, "
                     f"column {exc.colno}: {exc.msg}")


def _grid_from(cfg: dict, where: str):
    g = _require(cfg, "grid", where)
    try:
        return make_grid(float(_require(g, "r_max", where + ".grid")),
                         int(_require(g, "n_nodes", where + ".grid")))
    except GridSizingError as exc:
        _fail_config(f"{where}.grid: {exc}")


def _params_from(model: str, cfg: dict, where: str):
    p = _require(cfg, "params", where)
    try:
        if model == "toy":
            return toy.ToyParams(
                mass_m=float(_require(p, "mass_m", where)),
                energy_e=float(_require(p, "energy_e", where)),
                coupling_g=float(_require(p, "coupling_g", where)),
                lambda_scale=float(p.get("lambda_scale", toy.DEFAULT_LAMBDA)),
                point_coupling_mu=float(p.get("point_coupling_mu", 0.0)))
        if model == "fock":
            return fockchain.FockChainParams(
                boson_mass=float(_require(p, "boson_mass", where)),
                source_energy=float(_require(p, "source_energy", where)),
                coupling_h=float(_require(p, "coupling_h", where)),
                n_max=int(_require(p, "n_max", where)),
                boson_energy=float(p.get("boson_energy", 0.0)))
        if model == "pair":
            return pair.PairParams(
                fermion_mass=float(_require(p, "fermion_mass", where)),
                boson_channel_energy=float(
                    _require(p, "boson_channel_energy", where)),
                coupling_g=float(_require(p, "coupling_g", where)))
    except ValueError as exc:
        _fail_config(f"{where}.params: {exc}")
    _fail_config(f"{where}: unknown model '{model}' "
                 "(expected toy, fock or pair)")


def _assemble(model: str, params, grid):
    if model == "toy":
        return toy.assemble(params, grid)
    if model == "fock":
        return fockchain.assemble_chain(params, grid)
    return pair.assemble_pair(params, grid)


def _initial_dofs(model: str, system, spec: dict):
    kind = spec.get("kind", "vacuum" if model == "fock" else "pure_amplitude")
    if model in ("toy", "pair"):
        if kind in ("pure_amplitude", "pure_source", "pure_boson"):
            return (toy if model == "toy" else pair) \
                .pure_source_dofs(system) if model == "toy" \
                else pair.pure_boson_dofs(system)
        if kind == "gaussian_profile":
            width = float(spec.get("width", 1.0))
            prof = RadialProfile(system.grid,
                                 np.exp(-(system.grid.nodes / width) ** 2))
            if model == "toy":
                state = toy.constraint_embed(prof, system.params)
                dofs, _ = toy.state_to_dofs(system, state)
            else:
                state = pair.constraint_embed(prof, system.params)
                dofs, _ = pair.state_to_dofs(system, state)
            return dofs
        _fail_config(f"unknown initial kind '{kind}' for model {model}")
    if kind == "vacuum":
        return fockchain.vacuum_dofs(system)
    if kind == "one_boson":
        width = float(spec.get("width", 1.0))
        state = fockchain.vacuum_state(system.grid, system.params.n_max)
        state.sectors[0] = 0.0 + 0.0j
        state.sectors[1] = np.exp(
            -(system.grid.nodes / width) ** 2).astype(np.complex128)
        dofs, _ = fockchain.state_to_dofs(system, state)
        return dofs
    _fail_config(f"unknown initial kind '{kind}' for model fock")


def _write_csv(path: Path, header, rows, comments=()):
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x
                             for x in row])


def _write_metadata(out: Path, command: str, config: dict, seed, timings,
                    summary, extra=None):
    meta = {"command": command, "config": config, "seed": seed,
            "package_version": __version__,
            "versions": {"numpy": np.__version__,
                         "scipy": __import__("scipy").__version__},
            "timings_s": timings, "summary": summary}
    if extra:
        meta.update(extra)
    with open(out / "run_metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_verify(config: dict, out: Path, seed) -> int:
    suite = SuiteConfig(
        seed=int(seed if seed is not None else config.get("seed", 20250811)),
        n_scenes=int(config.get("n_scenes", 12)),
        inject_error=bool(config.get("inject_error", False)))
    t0 = time.perf_counter()
    report = run_suite(suite)
    elapsed = time.perf_counter() - t0
    report.write_csv(out / "verify_report.csv")
    from .plots import render_verification
    render_verification(report.rows, out / "verify_report.png")
    _write_metadata(out, "verify", config, suite.seed,
                    {"total": elapsed}, report.summary())
    return EXIT_OK if report.all_passed else EXIT_SCIENTIFIC


def cmd_spectrum(config: dict, out: Path, seed) -> int:
    model = _require(config, "model", "spectrum")
    grid = _grid_from(config, "spectrum")
    params = _params_from(model, config, "spectrum")
    k = int(config.get("k", 5))
    t0 = time.perf_counter()
    system = _assemble(model, params, grid)
    vals, vecs = lowest_eigenpairs_dofs(system, k)
    elapsed = time.perf_counter() - t0
    comments = [f"model={model} r_max={grid.r_max!r} n_nodes={grid.n_nodes}",
                f"params={params}"]
    _write_csv(out / "spectrum.csv", ["eigenindex", "eigenvalue"],
               [(j, float(vals[j])) for j in range(k)], comments=comments)
    from .plots import render_spectrum
    render_spectrum(vals, out / "spectrum.png", title=f"{model} spectrum")
    n_profiles = 0
    if config.get("write_eigenstates", False) and model in ("toy", "pair"):
        for j in range(k):
            state = (toy if model == "toy" else pair) \
                .dofs_to_state(system, vecs[:, j])
            prof = state.profile if model == "toy" else state.relative_profile
            write_profile_csv(out / f"eigenstate_{j:03d}.csv", prof)
            n_profiles += 1
    _write_metadata(out, "spectrum", config, seed, {"total": elapsed},
                    {"eigenvalues": [float(v) for v in vals],
                     "eigenstate_files": n_profiles})
    return EXIT_OK


def cmd_evolve(config: dict, out: Path, seed) -> int:
    model = _require(config, "model", "evolve")
    grid = _grid_from(config, "evolve")
    params = _params_from(model, config, "evolve")
    n_steps = int(_require(config, "n_steps", "evolve"))
    if n_steps < 1:
        _fail_config("evolve.n_steps must be >= 1")
    dt = config.get("dt")
    dt = float(dt) if dt is not None else default_dt(grid)
    reverse_check = bool(config.get("reverse_check", False))

    t0 = time.perf_counter()
    system = _assemble(model, params, grid)
    dofs = _initial_dofs(model, system, config.get("initial", {}))
    dofs = dofs / mass_norm(system, dofs)
    if model == "toy":
        traj = toy.evolve(system, dofs, dt, n_steps)
    elif model == "fock":
        traj = fockchain.evolve_chain(system, dofs, dt, n_steps)
    else:
        traj = pair.annihilation_dynamics(system, dofs, dt, n_steps)
    reversibility = None
    if reverse_check:
        if model == "toy":
            back = toy.evolve(system, traj.final_dofs, -dt, n_steps)
        elif model == "fock":
            back = fockchain.evolve_chain(system, traj.final_dofs, -dt,
                                          n_steps)
        else:
            back = pair.annihilation_dynamics(system, traj.final_dofs, -dt,
                                              n_steps)
        diff = back.final_dofs - dofs
        reversibility = float(
            np.sqrt(np.real(np.vdot(diff, system.mass_matrix @ diff))))
    elapsed = time.perf_counter() - t0

    header = ["time"] + traj.labels
    rows = [tuple(float(x) for x in
                  (traj.times[i], *(traj.columns[lab][i]
                                    for lab in traj.labels)))
            for i in range(len(traj.times))]
    _write_csv(out / "trajectory.csv", header, rows,
               comments=[f"model={model} dt={dt!r} n_steps={n_steps}"])
    from .plots import render_trajectory
    render_trajectory(traj.times, traj.columns, traj.labels,
                      out / "trajectory.png", title=f"{model} evolution")
    summary = {"norm_drift": traj.norm_drift(),
               "projection_loss": traj.projection_loss,
               "warnings": traj.warnings}
    if reversibility is not None:
        summary["reversibility_error"] = reversibility
    _write_metadata(out, "evolve", config, seed, {"total": elapsed}, summary)
    if reversibility is not None and reversibility > 1e-8:
        return EXIT_SCIENTIFIC
    return EXIT_OK


def _observed_order(hs, vs):
    """Solve (v1-v2)/(v2-v3) = (h1^p - h2^p)/(h2^p - h3^p) for p."""
    from scipy.optimize import brentq
    e12 = vs[0] - vs[1]
    e23 = vs[1] - vs[2]
    if e23 == 0 or e12 == 0 or (e12 / e23) <= 0:
        return float("nan")
    ratio = e12 / e23

    def f(p):
        return (hs[0]**p - hs[1]**p) / (hs[1]**p - hs[2]**p) - ratio

    try:
        return float(brentq(f, 0.05, 12.0))
    except ValueError:
        return float("nan")


def cmd_convergence(config: dict, out: Path, seed) -> int:
    model = _require(config, "model", "convergence")
    if model != "toy":
        _fail_config("convergence currently supports model 'toy' only")
    observable = config.get("observable", "lowest_eigenvalue")
    if observable != "lowest_eigenvalue":
        _fail_config(f"unknown observable '{observable}'")
    r_max = float(_require(config, "r_max", "convergence"))
    levels = [int(n) for n in _require(config, "grid_nodes", "convergence")]
    if len(levels) < 3:
        _fail_config("convergence needs at least 3 refinement levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        _fail_config("grid_nodes must increase strictly "
                     "(identical or non-monotone levels rejected)")
    params = _params_from(model, config, "convergence")

    t0 = time.perf_counter()
    values, spacings = [], []
    for n in levels:
        grid = make_grid(r_max, n)
        system = toy.assemble(params, grid)
        vals, _ = lowest_eigenpairs_dofs(system, 1)
        values.append(float(vals[0]))
        spacings.append(grid.spacing)
    orders = [""] * len(levels)
    for j in range(2, len(levels)):
        orders[j] = _observed_order(spacings[j - 2:j + 1],
                                    values[j - 2:j + 1])
    elapsed = time.perf_counter() - t0

    rows = [(levels[j], observable, values[j],
             orders[j] if orders[j] == "" else float(orders[j]))
            for j in range(len(levels))]
    _write_csv(out / "convergence.csv",
               ["n_nodes", "observable", "value", "observed_order"], rows,
               comments=[f"model={model} r_max={r_max!r}"])
    from .plots import render_convergence
    render_convergence(levels, values, out / "convergence.png")
    _write_metadata(out, "convergence", config, seed, {"total": elapsed},
                    {"values": values,
                     "orders": [o for o in orders if o != ""]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sectorops",
        description="Sector-coupled Hamiltonian laboratory: identity "
                    "verification, spectra, unitary dynamics, and "
                    "grid-refinement studies.",
        epilog="Run with --print-config-reference for the full JSON "
               "configuration reference.")
    parser.add_argument("--print-config-reference", action="store_true",
                        help="print the config reference page and exit")
    sub = parser.add_subparsers(dest="command")
    for name, descr in [
            ("verify", "run the operator-identity certification battery"),
            ("spectrum", "lowest generalized eigenvalues of one model"),
            ("evolve", "unitary implicit-midpoint time evolution"),
            ("convergence", "grid-refinement study with observed orders")]:
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="advisory thread cap; results are "
                            "deterministic regardless")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_config_reference:
        print(CONFIG_REFERENCE)
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        config = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {"verify": cmd_verify, "spectrum": cmd_spectrum,
                   "evolve": cmd_evolve, "convergence": cmd_convergence}
        return handler[args.command](config, out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
