"""Acceptance gate: end-to-end properties of the reference problem.

Reference problem: pole profile on the round 4-sphere (n = 4, both focal
varieties are points, D = pi), constant potential k = 1, singularity
strength s = 0.5, exponent q = 3, mesh N = 2048 with the default grading.
Each criterion prints one pass/fail line into the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from isoresolve import (
    ConstantPotential,
    GradedMesh,
    GridFunction,
    IsoparametricData,
    ProblemSpec,
    ShootingConfig,
    SolverConfig,
    bump_concentration,
    c0_bound_sweep,
    cli,
    embedding_battery,
    energy_J,
    holder_fit,
    match_shooting,
    minimize_Q,
    profile_from_ab,
    residual,
    solve_nodal,
    sphere_tube_profile,
    validate_asymptotics,
)
from conftest import ACCEPTANCE_LINES, write_config

N_REF = 2048
N_FINE = 8192


def report(num, desc, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {desc} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def spec():
    return ProblemSpec(profile=sphere_tube_profile(4, 0), q=3.0, s=0.5,
                       k=ConstantPotential(1.0))


@pytest.fixture(scope="module")
def ground(spec):
    start = time.perf_counter()
    rec = minimize_Q(spec, SolverConfig(mesh_n=N_REF))
    rec.meta["elapsed"] = time.perf_counter() - start
    return rec


@pytest.fixture(scope="module")
def shot(spec):
    return match_shooting(spec, (0.5, 3.0), ShootingConfig(mesh_n=N_REF))


@pytest.fixture(scope="module")
def nodal1(spec):
    return solve_nodal(spec, 1, SolverConfig(mesh_n=N_REF))


@pytest.fixture(scope="module")
def nodal2(spec):
    return solve_nodal(spec, 2, SolverConfig(mesh_n=N_REF))


def identity_errors(rec):
    A, B, J = rec.quadratic, rec.lq_mass, rec.energy_J
    nehari = abs(A - B) / (A + B)
    energy = abs(J - (0.5 - 1.0 / rec.spec.q) * B) / (1.0 + abs(J))
    return nehari, energy


def test_c01_ground_state_existence(ground):
    elapsed = ground.meta["elapsed"]
    ok = (ground.converged and elapsed < 60.0
          and float(np.min(ground.u.values)) > 0.0
          and ground.residual_norm <= 1e-8)
    report(1, "positive ground state, residual <= 1e-8, under 60 s", ok,
           f"J={ground.energy_J:.10f} residual={ground.residual_norm:.2e} "
           f"min={np.min(ground.u.values):.3e} time={elapsed:.2f}s")


def test_c02_focal_maximum_and_regularity(ground, spec):
    vals = ground.u.values
    at_max = vals[0] >= np.max(vals) * (1.0 - 1e-12)
    fit = holder_fit(ground.u, spec.s)
    ok = bool(at_max and fit.ok
              and abs(fit.exponent - fit.expected) <= 0.1 * fit.expected)
    report(2, "endpoint maximum with Holder exponent 2-s within 10%", ok,
           f"phi(0)={vals[0]:.6f} max={np.max(vals):.6f} "
           f"fit={fit.exponent:.4f} expected={fit.expected:.2f}")


def test_c03_critical_point_identities(ground, shot, nodal1, nodal2):
    worst_nehari = worst_energy = 0.0
    for rec in (ground, shot, nodal1, nodal2):
        nehari, energy = identity_errors(rec)
        worst_nehari = max(worst_nehari, nehari)
        worst_energy = max(worst_energy, energy)
    ok = worst_nehari <= 1e-8 and worst_energy <= 1e-6
    report(3, "Nehari and energy identities on all emitted records", ok,
           f"max |A-B|/(A+B)={worst_nehari:.2e} "
           f"max energy defect={worst_energy:.2e}")


def test_c04_cross_method_oracle(spec, ground, shot):
    scale = float(np.max(np.abs(ground.u.values)))
    sup_ref = float(np.max(np.abs(ground.u.values - shot.u.values))) / scale
    fine_var = minimize_Q(spec, SolverConfig(mesh_n=N_FINE))
    fine_shot = match_shooting(spec, (0.5, 3.0), ShootingConfig(mesh_n=N_FINE))
    scale_f = float(np.max(np.abs(fine_var.u.values)))
    sup_fine = float(np.max(np.abs(fine_var.u.values
                                   - fine_shot.u.values))) / scale_f
    ok = sup_ref <= 1e-3 and sup_fine <= 2.5e-4
    report(4, "shooting reproduces the variational ground state", ok,
           f"rel sup {sup_ref:.2e} at N={N_REF}, {sup_fine:.2e} at N={N_FINE}")


def test_c05_nodal_multiplicity_and_ordering(ground, nodal1, nodal2):
    counts_ok = nodal1.nodal_count == 1 and nodal2.nodal_count == 2
    order_ok = (ground.energy_J < nodal1.energy_J
                and nodal1.energy_J <= nodal2.energy_J)
    quality_ok = all(
        rec.converged and rec.residual_norm <= 1e-8
        and identity_errors(rec)[0] <= 1e-8 and identity_errors(rec)[1] <= 1e-6
        for rec in (nodal1, nodal2))
    ok = bool(counts_ok and order_ok and quality_ok)
    report(5, "nodal levels 1 and 2 with ordered energies", ok,
           f"counts=({nodal1.nodal_count},{nodal2.nodal_count}) "
           f"J=({ground.energy_J:.4f},{nodal1.energy_J:.4f},"
           f"{nodal2.energy_J:.4f})")


def test_c06_gradient_correctness(spec):
    mesh = GradedMesh(spec.profile, spec.s, N_REF)
    rng = np.random.default_rng(2026)
    worst = 0.0
    for _ in range(20):
        u_vals = rng.standard_normal(mesh.n_nodes)
        v_vals = rng.standard_normal(mesh.n_nodes)
        r, _ = residual(GridFunction(mesh, u_vals), spec)
        analytic = float(r.values @ v_vals)
        eps = 1e-6
        jp = energy_J(GridFunction(mesh, u_vals + eps * v_vals), spec)
        jm = energy_J(GridFunction(mesh, u_vals - eps * v_vals), spec)
        rel = abs((jp - jm) / (2.0 * eps) - analytic) / max(abs(analytic),
                                                            1e-12)
        worst = max(worst, rel)
    ok = worst <= 1e-5
    report(6, "directional derivatives match finite differences", ok,
           f"worst rel err {worst:.2e} over 20 random pairs")


def test_c07_embedding_batteries(spec):
    battery = embedding_battery(spec, 200, seed=0, mesh_n=512)
    drifts = {c.name: c.value for c in battery.checks if "drift" in c.name}
    super_spec = ProblemSpec(profile=spec.profile, q=10.0, s=spec.s,
                             k=spec.k)
    growth = bump_concentration(super_spec)["growth"]
    ok = bool(battery.passed and growth >= 10.0)
    report(7, "Hardy/embedding suprema stable, supercritical bump grows", ok,
           f"drifts={max(drifts.values()):.2e} (200 trials) "
           f"bump growth={growth:.1f}x")


def test_c08_asymptotic_geometry():
    failures = []
    for n in (3, 4, 5):
        for d0 in (0, 1):
            rep = validate_asymptotics(sphere_tube_profile(n, d0), tol=1e-3)
            if not rep.passed:
                failures.append((n, d0))
    data = IsoparametricData(
        a=lambda f: 4.0 * np.asarray(f, dtype=float),
        b=lambda f: 1.0 - np.asarray(f, dtype=float) ** 2,
        f_lo=-1.0, f_hi=1.0,
        db=lambda f: -2.0 * np.asarray(f, dtype=float))
    rec = profile_from_ab(data, 4, 0, 0)
    ref = sphere_tube_profile(4, 0)
    d_err = abs(rec.D - ref.D)
    t = np.linspace(0.05 * ref.D, 0.95 * ref.D, 31)
    m_err = float(np.max(np.abs(rec.m(t) - ref.m(t))))
    ok = not failures and d_err <= 1e-6 and m_err <= 1e-6
    report(8, "profile family validates, first-integral data round-trips", ok,
           f"failures={failures} |D err|={d_err:.1e} |m err|={m_err:.1e}")


def test_c09_bound_sweep(spec):
    specs = [ProblemSpec(profile=spec.profile, q=3.0, s=0.5,
                         k=ConstantPotential(k))
             for k in (0.5, 1.0, 1.5, 2.0)]
    rep = c0_bound_sweep(specs, SolverConfig(mesh_n=N_REF))
    maxima = [e.max_value for e in rep.entries]
    finite = all(math.isfinite(v) for v in maxima)
    q_vals = [e.max_value for e in rep.q_diagnostic if e.converged]
    monotone = all(a < b for a, b in zip(q_vals, q_vals[1:]))
    ok = bool(rep.all_converged and finite)
    report(9, "4-point potential sweep with finite maxima", ok,
           f"family max={rep.family_max:.4f} "
           f"q-diagnostic {'grows' if monotone else 'reported'}: "
           + ",".join(f"{v:.3f}" for v in q_vals))


def test_c10_determinism_and_verify(tmp_path):
    cfg = write_config(tmp_path / "ref.toml", mesh_n=N_REF)
    outs = [tmp_path / "a", tmp_path / "b"]
    runs = []
    for out in outs:
        assert cli.main(["solve-ground", "--config", str(cfg),
                         "--out", str(out)]) == 0
        runs.append(next(p for p in out.iterdir() if p.is_dir()))
    identical = ((runs[0] / "solution.csv").read_bytes()
                 == (runs[1] / "solution.csv").read_bytes())
    verify_rcs = [cli.main(["verify", str(run)]) for run in runs]
    passed = [json.loads((run / "verify.json").read_text())["passed"]
              for run in runs]
    ok = bool(identical and verify_rcs == [0, 0] and all(passed))
    report(10, "byte-identical reruns and clean verification", ok,
           f"identical={identical} verify exits={verify_rcs}")
