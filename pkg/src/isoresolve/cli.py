"""Batch command-line front end.

Parses TOML run configs, orchestrates solves, sweeps and verification,
and persists every result under a run directory together with a manifest
that lists each artifact with a content hash, so a verification pass can
re-derive every reported number from the persisted files alone.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import shutil
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .geometry import (
    AsymptoticsError,
    SubcriticalityError,
    profile_from_table,
    sphere_tube_profile,
)
from .function_space import (
    CoercivityError,
    ConstantPotential,
    GridFunction,
    ProblemSpec,
    TablePotential,
    h1v_norm_sq,
    quadratic_energy,
    residual,
    singular_mass,
)
from .oracle import (
    CheckResult,
    VerificationReport,
    fd_residual_oracle,
    holder_fit,
)
from .solvers import (
    BracketError,
    ConvergenceError,
    NodalCollapseError,
    ShootingConfig,
    SolverConfig,
    count_sign_changes,
    c0_bound_sweep,
    match_shooting,
    minimize_Q,
    shoot_from_zero,
    solve_nodal,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GATE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_NODAL_COLLAPSE = 4
EXIT_VERIFY_FAILED = 5

# Checks that gate the exit code of a solve command; the remaining checks
# are reported but informational.
MANDATORY_CHECKS = {
    "positive-or-zero",
    "nodal-count",
    "natural-constraint",
    "energy-identity",
    "residual-tolerance",
}


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        return tomllib.loads(raw.decode("utf-8")), raw
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"could not parse config {path}: {err}")


class ConfigError(RuntimeError):
    """Unreadable or unparseable configuration input."""


def _load_columns(path: str, ncols: int) -> np.ndarray:
    """Load a numeric table, tolerating a header line and comma delimiters."""
    for delim in (None, ","):
        for skip in (0, 1):
            try:
                arr = np.loadtxt(path, delimiter=delim, skiprows=skip,
                                 ndmin=2)
            except ValueError:
                continue
            except OSError as err:
                raise ConfigError(str(err))
            if arr.shape[1] >= ncols:
                return arr
    raise ConfigError(f"could not parse a {ncols}-column table from {path}")


def _build_profile(table: dict, base_dir: str = "."):
    kind = table.get("kind", "sphere_tube")
    if kind in ("sphere_tube", "pole"):
        n = int(table.get("n", 0))
        d0 = int(table.get("d0", 0))
        if kind == "pole" and d0 != 0:
            raise ValueError("profile kind 'pole' requires d0 = 0")
        return sphere_tube_profile(n, d0)
    if kind == "from_ab_table":
        path = table.get("path")
        if not path:
            raise ValueError("profile kind 'from_ab_table' needs a path")
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        return profile_from_table(full, int(table["n"]), int(table["d0"]),
                                  int(table["d1"]))
    raise ValueError(f"unknown profile kind {kind!r}; expected sphere_tube, "
                     "pole or from_ab_table")


def _build_potential(table: dict, base_dir: str = "."):
    kind = table.get("kind", "constant")
    if kind == "constant":
        return ConstantPotential(float(table.get("value", 1.0)))
    if kind == "table":
        path = table.get("path")
        if not path:
            raise ValueError("potential kind 'table' needs a path")
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        arr = _load_columns(full, 2)
        return TablePotential(arr[:, 0], arr[:, 1])
    raise ValueError(f"unknown potential kind {kind!r}; expected constant "
                     "or table")


def _build_spec(config: dict, base_dir: str = ".") -> ProblemSpec:
    problem = config.get("problem", {})
    profile = _build_profile(config.get("profile", {}), base_dir)
    potential = _build_potential(config.get("potential", {}), base_dir)
    return ProblemSpec(profile, float(problem.get("q", 3.0)),
                       float(problem.get("s", 0.5)), potential)


def _table_to_dataclass(cls, table: dict, label: str, **overrides):
    known = set(cls.__dataclass_fields__)
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown [{label}] config keys: "
                         f"{', '.join(sorted(unknown))}")
    kwargs = dict(table)
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    return cls(**kwargs)


def _solver_config(config: dict, mesh_n: int | None) -> SolverConfig:
    table = dict(config.get("solver", {}))
    table.pop("level", None)
    return _table_to_dataclass(SolverConfig, table, "solver", mesh_n=mesh_n)


def _shooting_config(config: dict, mesh_n: int | None) -> ShootingConfig:
    table = dict(config.get("shooting", {}))
    table.pop("phi0", None)
    table.pop("bracket", None)
    return _table_to_dataclass(ShootingConfig, table, "shooting",
                               mesh_n=mesh_n)


def _out_base(args, config: dict) -> str:
    env = os.environ.get("ISORESOLVE_OUT")
    if env:
        return env
    if getattr(args, "out", None):
        return args.out
    return config.get("output", {}).get("out", "runs")


def _make_run_dir(base: str, raw_config: bytes) -> str:
    digest = hashlib.sha256(raw_config).hexdigest()[:8]
    stamp = datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y%m%dT%H%M%S")
    run_dir = os.path.join(base, f"{stamp}-{digest}")
    suffix = 0
    candidate = run_dir
    while os.path.exists(candidate):
        suffix += 1
        candidate = f"{run_dir}-{suffix}"
    os.makedirs(os.path.join(candidate, "plotdata"))
    return candidate


# ---------------------------------------------------------------------------
# artifact emission


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_table(path: str, header: str, columns) -> None:
    rows = np.column_stack(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _materialize_inputs(run_dir: str, config: dict, base_dir: str) -> dict:
    """Copy table inputs into the run dir so it is self-contained.

    Returns a config snapshot whose paths point at the copies (relative to
    the run dir), with the original locations kept under source_path.
    """
    snapshot = json.loads(json.dumps(config))  # deep copy of plain data
    for section, name in (("profile", "profile_table"),
                          ("potential", "potential_table")):
        table = snapshot.get(section, {})
        path = table.get("path")
        if not path:
            continue
        src = path if os.path.isabs(path) else os.path.join(base_dir, path)
        os.makedirs(os.path.join(run_dir, "inputs"), exist_ok=True)
        ext = os.path.splitext(src)[1] or ".csv"
        rel = os.path.join("inputs", name + ext)
        shutil.copyfile(src, os.path.join(run_dir, rel))
        table["source_path"] = path
        table["path"] = rel
    return snapshot


def _profile_fingerprint(profile, table: dict) -> dict:
    return {
        "kind": table.get("kind", "sphere_tube"),
        "name": profile.name,
        "n": profile.n,
        "d0": profile.d0,
        "d1": profile.d1,
        "D": profile.D,
        "symmetric": profile.symmetric,
        "normalization": "level-volume weight normalized to V(D/2) = 1",
    }


def _record_verification(rec, spec) -> VerificationReport:
    """Solve-time verification report: record checks plus oracle extras."""
    report = VerificationReport()
    for check in rec.checks.values():
        report.add(check)
    window_lo = 0.05 * spec.profile.D
    dist = spec.profile.distance(rec.u.mesh.nodes)
    window = (rec.u.mesh.nodes >= window_lo) & \
        (rec.u.mesh.nodes <= spec.profile.D - window_lo)
    strong_scale = float(np.max(
        np.abs(rec.u.values[window]) ** (spec.q - 1.0)
        / dist[window] ** spec.s))
    fd_sup = fd_residual_oracle(rec.u, spec)
    report.add(CheckResult(
        name="strong-form-consistency",
        description="divided-difference strong-form residual is small "
                    "relative to the largest equation term on the window",
        value=fd_sup / max(strong_scale, 1e-300), threshold=1e-3,
        passed=bool(fd_sup <= 1e-3 * max(strong_scale, 1e-300))))
    report.data["fd_residual_sup"] = fd_sup
    report.data["strong_term_scale"] = strong_scale
    return report


def _emit_record(run_dir: str, rec, spec, snapshot: dict, raw_config: bytes,
                 command: dict, level: int | None = None) -> dict:
    """Write solution artifacts and the manifest; returns the manifest."""
    sol_path = os.path.join(run_dir, "solution.csv")
    rec.u.to_csv(sol_path)
    _write_table(os.path.join(run_dir, "plotdata", "profile.csv"),
                 "t,phi", (rec.u.mesh.nodes, rec.u.values))
    _write_table(os.path.join(run_dir, "plotdata", "energies.csv"),
                 "level,J", ([float(level or 0)], [rec.energy_J]))
    report = _record_verification(rec, spec)
    _write_json(os.path.join(run_dir, "verify.json"), report.to_dict())
    manifest = {
        "tool": {"name": "isoresolve", "version": __version__},
        "command": command,
        "timestamp_utc": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "config": snapshot,
        "config_sha256": hashlib.sha256(raw_config).hexdigest(),
        "profile": _profile_fingerprint(spec.profile,
                                        snapshot.get("profile", {})),
        "problem": {"q": spec.q, "s": spec.s},
        "mesh": {"n_cells": rec.u.mesh.n_cells, "gamma": rec.u.mesh.gamma},
        "tolerances": {
            "tol_residual": command.get("tol_residual"),
            "max_iters": command.get("max_iters"),
        },
        "outcome": rec.to_dict(),
        "artifacts": _hash_artifacts(run_dir),
    }
    _write_json(os.path.join(run_dir, "manifest.json"), manifest)
    return manifest


def _hash_artifacts(run_dir: str) -> dict:
    """Content hashes of every persisted file except the reports."""
    skip = {"manifest.json", "verify.json"}
    hashes = {}
    for root, _, files in os.walk(run_dir):
        for name in sorted(files):
            rel = os.path.relpath(os.path.join(root, name), run_dir)
            if rel in skip:
                continue
            hashes[rel] = _sha256_file(os.path.join(root, name))
    return hashes


def _solve_exit(rec, report: VerificationReport) -> int:
    mandatory = [c for c in report.checks if c.name in MANDATORY_CHECKS]
    if rec.converged and all(c.passed for c in mandatory):
        return EXIT_OK
    failed = [c.name for c in mandatory if not c.passed]
    print(f"mandatory checks failed: {', '.join(failed)}", file=sys.stderr)
    return EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# commands


def cmd_solve_ground(args) -> int:
    config, raw = _load_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    spec = _build_spec(config, base_dir)
    cfg = _solver_config(config, args.mesh_n)
    rec = minimize_Q(spec, cfg)
    run_dir = _make_run_dir(_out_base(args, config), raw)
    snapshot = _materialize_inputs(run_dir, config, base_dir)
    command = {"name": "solve-ground", "mesh_n": cfg.mesh_n,
               "tol_residual": cfg.tol_residual,
               "max_iters": cfg.max_iters}
    _emit_record(run_dir, rec, spec, snapshot, raw, command, level=0)
    report = _record_verification(rec, spec)
    print(rec.summary())
    print(f"run dir: {run_dir}")
    return _solve_exit(rec, report)


def cmd_solve_nodal(args) -> int:
    config, raw = _load_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    level = args.level if args.level is not None else \
        int(config.get("solver", {}).get("level", 1))
    if level < 1:
        print(f"nodal level must be at least 1, got {level}",
              file=sys.stderr)
        return EXIT_GATE
    spec = _build_spec(config, base_dir)
    cfg = _solver_config(config, args.mesh_n)
    rec = solve_nodal(spec, level, cfg)
    run_dir = _make_run_dir(_out_base(args, config), raw)
    snapshot = _materialize_inputs(run_dir, config, base_dir)
    command = {"name": "solve-nodal", "level": level, "mesh_n": cfg.mesh_n,
               "tol_residual": cfg.tol_residual,
               "max_iters": cfg.max_iters}
    _emit_record(run_dir, rec, spec, snapshot, raw, command, level=level)
    report = _record_verification(rec, spec)
    print(rec.summary())
    print(f"run dir: {run_dir}")
    return _solve_exit(rec, report)


def cmd_shoot(args) -> int:
    config, raw = _load_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    spec = _build_spec(config, base_dir)
    shoot_table = config.get("shooting", {})
    cfg = _shooting_config(config, args.mesh_n)
    if args.phi0 is not None and args.bracket is not None:
        print("shoot takes exactly one of --phi0 or --bracket",
              file=sys.stderr)
        return EXIT_GATE
    if args.phi0 is not None or args.bracket is not None:
        phi0, bracket = args.phi0, args.bracket
    else:
        phi0 = shoot_table.get("phi0")
        bracket = shoot_table.get("bracket")
        if phi0 is not None and bracket is not None:
            phi0 = None  # a bracketed match is the more complete artifact
        if phi0 is None and bracket is None:
            print("shoot needs one of --phi0 or --bracket (or the "
                  "corresponding [shooting] config keys)", file=sys.stderr)
            return EXIT_GATE

    run_dir = _make_run_dir(_out_base(args, config), raw)
    snapshot = _materialize_inputs(run_dir, config, base_dir)
    if phi0 is not None:
        state = shoot_from_zero(spec, float(phi0), cfg)
        _write_table(os.path.join(run_dir, "trajectory.csv"),
                     "t,phi,dphi", (state.t, state.phi, state.dphi))
        manifest = {
            "tool": {"name": "isoresolve", "version": __version__},
            "command": {"name": "shoot", "phi0": float(phi0),
                        "mesh_n": cfg.mesh_n, "rtol": cfg.rtol},
            "timestamp_utc": datetime.datetime.now(
                datetime.timezone.utc).isoformat(),
            "config": snapshot,
            "config_sha256": hashlib.sha256(raw).hexdigest(),
            "profile": _profile_fingerprint(spec.profile,
                                            snapshot.get("profile", {})),
            "problem": {"q": spec.q, "s": spec.s},
            "outcome": {
                "phi0": state.phi0, "t_start": state.t_start,
                "reached_mid": state.reached_mid, "blow_up": state.blow_up,
                "value_mid": state.value_mid, "slope_mid": state.slope_mid,
                "rhs_evaluations": state.n_steps,
            },
            "artifacts": _hash_artifacts(run_dir),
        }
        _write_json(os.path.join(run_dir, "manifest.json"), manifest)
        print(f"shot phi0={float(phi0):.6g}: reached_mid="
              f"{state.reached_mid} blow_up={state.blow_up} "
              f"value_mid={state.value_mid:.6g} "
              f"slope_mid={state.slope_mid:.6g}")
        print(f"run dir: {run_dir}")
        return EXIT_OK if (state.reached_mid or state.blow_up) \
            else EXIT_NO_CONVERGENCE

    rec = match_shooting(spec, (float(bracket[0]), float(bracket[1])), cfg,
                         mode=args.mode)
    command = {"name": "shoot", "bracket": [float(bracket[0]),
                                            float(bracket[1])],
               "mode": args.mode, "mesh_n": cfg.mesh_n, "rtol": cfg.rtol}
    _emit_record(run_dir, rec, spec, snapshot, raw, command,
                 level=rec.nodal_count)
    report = _record_verification(rec, spec)
    print(rec.summary())
    print(f"run dir: {run_dir}")
    return _solve_exit(rec, report)


def cmd_sweep(args) -> int:
    config, raw = _load_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    sweep_table = config.get("sweep", {})
    k_values = [float(v) for v in sweep_table.get("k_values", [])]
    workers = args.workers if args.workers is not None else \
        int(sweep_table.get("workers", 1))
    run_dir = _make_run_dir(_out_base(args, config), raw)
    snapshot = _materialize_inputs(run_dir, config, base_dir)
    sweep_csv = os.path.join(run_dir, "sweep.csv")

    if not k_values:
        with open(sweep_csv, "w", encoding="utf-8") as fh:
            fh.write("spec_id,max_phi,J,converged\n")
        _write_json(os.path.join(run_dir, "manifest.json"), {
            "tool": {"name": "isoresolve", "version": __version__},
            "command": {"name": "sweep", "workers": workers},
            "config": snapshot,
            "config_sha256": hashlib.sha256(raw).hexdigest(),
            "outcome": {"entries": [], "family_max": None},
            "artifacts": _hash_artifacts(run_dir),
        })
        print("empty sweep family: nothing to solve")
        print(f"run dir: {run_dir}")
        return EXIT_OK

    profile = _build_profile(config.get("profile", {}), base_dir)
    problem = config.get("problem", {})
    q = float(problem.get("q", 3.0))
    s = float(problem.get("s", 0.5))
    specs = [ProblemSpec(profile, q, s, ConstantPotential(v))
             for v in k_values]
    cfg = _solver_config(config, args.mesh_n)
    q_values = sweep_table.get("q_values")
    report = c0_bound_sweep(specs, cfg, workers=workers, q_values=q_values)

    with open(sweep_csv, "w", encoding="utf-8") as fh:
        fh.write("spec_id,max_phi,J,converged\n")
        for entry in report.entries:
            fh.write("%s,%.17g,%.17g,%s\n" % (
                entry.label, entry.max_value, entry.energy_J,
                "true" if entry.converged else "false"))
    os.makedirs(os.path.join(run_dir, "manifests"), exist_ok=True)
    for entry, k in zip(report.entries, k_values):
        _write_json(os.path.join(run_dir, "manifests",
                                 f"{entry.label}.json"),
                    {"k": k, **entry.to_dict()})
    manifest = {
        "tool": {"name": "isoresolve", "version": __version__},
        "command": {"name": "sweep", "workers": workers,
                    "mesh_n": cfg.mesh_n},
        "timestamp_utc": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "config": snapshot,
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "profile": _profile_fingerprint(profile,
                                        snapshot.get("profile", {})),
        "problem": {"q": q, "s": s},
        "outcome": report.to_dict(),
        "artifacts": _hash_artifacts(run_dir),
    }
    _write_json(os.path.join(run_dir, "manifest.json"), manifest)
    print(report.summary())
    print(f"run dir: {run_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    run_dir = args.run_dir
    manifest_path = os.path.join(run_dir, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"could not read manifest: {err}", file=sys.stderr)
        return EXIT_CONFIG

    report = VerificationReport()
    artifacts = manifest.get("artifacts", {})
    for rel, expected in sorted(artifacts.items()):
        path = os.path.join(run_dir, rel)
        try:
            actual = _sha256_file(path)
        except OSError:
            actual = "<missing>"
        report.add(CheckResult(
            name=f"artifact-hash:{rel}",
            description="persisted artifact matches the content hash "
                        "recorded in the manifest",
            value=0.0 if actual == expected else 1.0, threshold=0.0,
            passed=actual == expected,
            note="" if actual == expected else f"got {actual[:12]}..."))

    if "solution.csv" in artifacts:
        code = _verify_solution(run_dir, manifest, report)
        if code is not None:
            return code

    _write_json(os.path.join(run_dir, "verify.json"), report.to_dict())
    print(report.summary())
    if report.passed:
        return EXIT_OK
    return EXIT_VERIFY_FAILED


def _verify_solution(run_dir: str, manifest: dict,
                     report: VerificationReport):
    """Recompute every reported number from the persisted solution.

    Returns an exit code for unreadable artifacts, or None to let the
    caller judge the report.
    """
    config = manifest.get("config", {})
    try:
        spec = _build_spec(config, run_dir)
    except (ConfigError, OSError) as err:
        print(f"could not rebuild problem from manifest config: {err}",
              file=sys.stderr)
        return EXIT_CONFIG
    mesh_info = manifest.get("mesh", {})
    mesh = spec.build_mesh(int(mesh_info.get("n_cells")),
                           mesh_info.get("gamma"))
    try:
        u = GridFunction.from_csv(os.path.join(run_dir, "solution.csv"),
                                  mesh)
    except (OSError, ValueError) as err:
        print(f"could not read solution.csv: {err}", file=sys.stderr)
        return EXIT_CONFIG

    outcome = manifest.get("outcome", {})
    A = quadratic_energy(u, spec)
    B = singular_mass(u, spec)
    J = 0.5 * A - B / spec.q
    _, dual = residual(u, spec)
    scale = max(abs(A), abs(B), 1e-300)
    report.add(CheckResult(
        name="natural-constraint",
        description="recomputed quadratic energy equals the recomputed "
                    "weighted Lq mass",
        value=abs(A - B) / scale, threshold=1e-8,
        passed=bool(abs(A - B) <= 1e-8 * scale)))
    j_ref = (0.5 - 1.0 / spec.q) * B
    report.add(CheckResult(
        name="energy-identity",
        description="recomputed J equals (1/2 - 1/q) times the recomputed "
                    "weighted Lq mass",
        value=abs(J - j_ref), threshold=1e-6 * (1.0 + abs(J)),
        passed=bool(abs(J - j_ref) <= 1e-6 * (1.0 + abs(J)))))
    for name, stored, recomputed in (
            ("energy-J", outcome.get("energy_J"), J),
            ("lq-mass", outcome.get("lq_mass"), B),
            ("residual-norm", outcome.get("residual_norm"), dual)):
        if stored is None:
            continue
        err = abs(recomputed - stored)
        tol = 1e-6 * (1.0 + abs(stored))
        report.add(CheckResult(
            name=f"stored-{name}",
            description=f"manifest {name} matches the value recomputed "
                        "from the persisted solution",
            value=err, threshold=tol, passed=bool(err <= tol)))
    stored_count = outcome.get("nodal_count")
    if stored_count is not None:
        count = count_sign_changes(u.values)
        report.add(CheckResult(
            name="stored-nodal-count",
            description="manifest sign-change count matches the persisted "
                        "solution",
            value=float(count), threshold=float(stored_count),
            passed=count == int(stored_count)))
    window_lo = 0.05 * spec.profile.D
    dist = spec.profile.distance(mesh.nodes)
    window = (mesh.nodes >= window_lo) & \
        (mesh.nodes <= spec.profile.D - window_lo)
    strong_scale = float(np.max(
        np.abs(u.values[window]) ** (spec.q - 1.0)
        / dist[window] ** spec.s))
    fd_sup = fd_residual_oracle(u, spec)
    report.add(CheckResult(
        name="strong-form-consistency",
        description="divided-difference strong-form residual is small "
                    "relative to the largest equation term on the window",
        value=fd_sup / max(strong_scale, 1e-300), threshold=1e-3,
        passed=bool(fd_sup <= 1e-3 * max(strong_scale, 1e-300))))
    report.data.update({
        "recomputed": {"quadratic": A, "lq_mass": B, "energy_J": J,
                       "residual_norm": dual,
                       "h1v_norm": math.sqrt(h1v_norm_sq(u, spec)),
                       "fd_residual_sup": fd_sup},
    })
    fit = holder_fit(u, spec.s)
    if fit.ok:
        report.data["holder_fit"] = fit.to_dict()
    return None


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoresolve",
        description="Solve and verify the reduced singular two-point "
                    "problem on an isoparametric level structure.")
    parser.add_argument("--version", action="version",
                        version=f"isoresolve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="TOML run configuration")
        p.add_argument("--out", default=None,
                       help="base output directory (default: runs; the "
                            "ISORESOLVE_OUT environment variable overrides "
                            "this flag)")
        p.add_argument("--mesh-n", type=int, default=None, dest="mesh_n",
                       help="override the mesh cell count")

    p = sub.add_parser("solve-ground",
                       help="compute the positive ground state")
    add_common(p)
    p.set_defaults(func=cmd_solve_ground)

    p = sub.add_parser("solve-nodal",
                       help="compute a sign-changing solution")
    add_common(p)
    p.add_argument("--level", type=int, default=None,
                   help="number of interior sign changes (default 1)")
    p.set_defaults(func=cmd_solve_nodal)

    p = sub.add_parser("shoot",
                       help="integrate from the singular endpoint, or "
                            "match a bracket")
    add_common(p)
    p.add_argument("--phi0", type=float, default=None,
                   help="single-shot startup value")
    p.add_argument("--bracket", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"),
                   help="startup-value bracket for midpoint matching")
    p.add_argument("--mode", choices=("auto", "even", "odd", "general"),
                   default="auto", help="matching mode for --bracket")
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("sweep", help="uniform-bound family sweep")
    add_common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for family members")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify",
                       help="re-derive all reported numbers from a run dir")
    p.add_argument("run_dir", help="run directory to verify")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError,
            PermissionError) as err:
        print(f"config/input error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NodalCollapseError as err:
        print(f"nodal collapse: {err}", file=sys.stderr)
        return EXIT_NODAL_COLLAPSE
    except (ConvergenceError, BracketError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (SubcriticalityError, CoercivityError, AsymptoticsError,
            ValueError) as err:
        print(f"gate refused: {err}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
