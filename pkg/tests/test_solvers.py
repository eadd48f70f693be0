"""Solvers: variational ground state, nodal levels, shooting, sweeps."""

import math

import numpy as np
import pytest

from isoresolve import (
    BracketError,
    ConstantPotential,
    NodalCollapseError,
    ProblemSpec,
    ShootingConfig,
    SolverConfig,
    c0_bound_sweep,
    count_sign_changes,
    match_shooting,
    minimize_Q,
    nehari_rescale,
    shoot_from_zero,
    solve_nodal,
    sphere_tube_profile,
    startup_series,
)
from isoresolve.function_space import CoercivityError


class TestGroundState:
    def test_converges_with_small_residual(self, ground_unit):
        g = ground_unit
        assert g.converged
        assert g.residual_norm <= 1e-8
        assert g.iterations > 0
        assert g.wall_time > 0.0

    def test_positive_with_endpoint_maximum(self, ground_unit):
        vals = ground_unit.u.values
        assert np.min(vals) > 0.0
        assert np.argmax(vals) == 0 or np.argmax(vals) == vals.size - 1

    def test_all_record_checks_pass(self, ground_unit):
        assert ground_unit.checks_passed
        expected = {"positive-or-zero", "singular-endpoint-max",
                    "holder-endpoint-exponent", "natural-constraint",
                    "energy-identity", "residual-tolerance"}
        assert expected <= set(ground_unit.checks)

    def test_critical_point_identities(self, ground_unit):
        g = ground_unit
        A, B, J = g.quadratic, g.lq_mass, g.energy_J
        assert abs(A - B) / (A + B) <= 1e-8
        q = g.spec.q
        assert abs(J - (0.5 - 1.0 / q) * B) <= 1e-6 * (1.0 + abs(J))

    def test_energy_regression_anchor(self, ground_unit):
        assert ground_unit.energy_J == pytest.approx(0.24124112358222644,
                                                     rel=1e-7)

    def test_inherits_profile_symmetry(self, ground_unit):
        vals = ground_unit.u.values
        sup = np.max(np.abs(vals - vals[::-1])) / np.max(np.abs(vals))
        assert sup < 1e-10

    def test_rejects_supercritical_exponent(self, pole_profile):
        spec = ProblemSpec(profile=pole_profile, q=4.5, s=0.5,
                           k=ConstantPotential(1.0))
        from isoresolve import SubcriticalityError
        with pytest.raises(SubcriticalityError):
            minimize_Q(spec, SolverConfig(mesh_n=64))

    def test_rejects_noncoercive_potential(self, pole_profile):
        spec = ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                           k=ConstantPotential(-2.0))
        with pytest.raises(CoercivityError):
            minimize_Q(spec, SolverConfig(mesh_n=64))

    def test_record_serialization(self, ground_unit):
        d = ground_unit.to_dict()
        for key in ("method", "energy_J", "quadratic", "lq_mass",
                    "residual_norm", "nodal_count", "converged", "checks"):
            assert key in d
        assert "J=" in ground_unit.summary()


class TestNehariRescale:
    def test_scaling_projects_back(self, ref_spec, ground_unit):
        doubled = ground_unit.u.with_values(2.0 * ground_unit.u.values)
        t_u, back = nehari_rescale(doubled, ref_spec)
        assert t_u == pytest.approx(0.5, rel=1e-10)
        np.testing.assert_allclose(back.values, ground_unit.u.values,
                                   rtol=1e-12)

    def test_zero_function_rejected(self, ref_spec, unit_mesh):
        from isoresolve import GridFunction
        zero = GridFunction(unit_mesh, np.zeros(unit_mesh.n_nodes))
        with pytest.raises(ValueError):
            nehari_rescale(zero, ref_spec)

    def test_quadratic_exponent_rejected(self, pole_profile, unit_mesh):
        from isoresolve import GridFunction
        spec = ProblemSpec(profile=pole_profile, q=2.0, s=0.5,
                           k=ConstantPotential(1.0))
        one = GridFunction(unit_mesh, np.ones(unit_mesh.n_nodes))
        with pytest.raises(ValueError):
            nehari_rescale(one, spec)


class TestStartupSeries:
    def test_coefficients(self, ref_spec):
        series = startup_series(ref_spec, 1.0)
        # B = -phi0^(q-1) / ((2-s)(n - d0 - s)), C = k(0) phi0 / (2 (n - d0))
        assert series.B == pytest.approx(-1.0 / (1.5 * 3.5), rel=1e-12)
        assert series.C == pytest.approx(0.125, rel=1e-12)
        assert series(0.0) == pytest.approx(1.0)

    def test_residual_order_and_amplitude(self, ref_spec):
        # Substituting the truncated series leaves a leading defect
        # (q-1) phi0^(q-2) |B| t^(2-2s); at s = 0.5 that is ~0.381 t and
        # halving t halves the defect.
        series = startup_series(ref_spec, 1.0)
        m = ref_spec.profile.m
        amp = 2.0 * abs(series.B)

        def defect(t):
            phi = series(t)
            return (series(t, 2) - m(t) * series(t, 1) - phi
                    + abs(phi) * phi / t ** 0.5)

        ladder = [1e-4, 5e-5, 2.5e-5]
        values = [abs(defect(t)) for t in ladder]
        for t, v in zip(ladder, values):
            assert v / t ** 1.0 == pytest.approx(amp, rel=0.05)
        assert values[0] / values[1] == pytest.approx(2.0, rel=0.05)

    def test_sides_agree_for_symmetric_spec(self, ref_spec):
        left = startup_series(ref_spec, 2.0, side="left")
        right = startup_series(ref_spec, 2.0, side="right")
        for x in (1e-3, 1e-2, 0.1):
            assert right(x) == pytest.approx(left(x), rel=1e-12)


class TestShooting:
    def test_single_shot_reaches_midpoint(self, ref_spec):
        state = shoot_from_zero(ref_spec, 1.0, ShootingConfig(mesh_n=512))
        assert state.reached_mid and not state.blow_up
        assert state.value_mid == pytest.approx(0.9438892375019646, rel=1e-7)
        assert state.slope_mid == pytest.approx(0.06288244824197896, rel=1e-5)
        assert state.t.size > 0 and state.phi.size == state.t.size

    def test_large_amplitude_still_global(self, ref_spec):
        # The nonlinearity is restoring for this equation class, so even a
        # huge launch value integrates to the midpoint instead of blowing up.
        state = shoot_from_zero(ref_spec, 1e6, ShootingConfig(mesh_n=256))
        assert state.reached_mid and not state.blow_up

    def test_nonpositive_launch_rejected(self, ref_spec):
        with pytest.raises(ValueError):
            shoot_from_zero(ref_spec, 0.0)
        with pytest.raises(ValueError):
            shoot_from_zero(ref_spec, -1.0)

    def test_even_match_reproduces_ground_state(self, ref_spec, ground_unit):
        rec = match_shooting(ref_spec, (0.5, 3.0), ShootingConfig(mesh_n=512))
        assert rec.converged and rec.nodal_count == 0
        scale = np.max(np.abs(ground_unit.u.values))
        sup = np.max(np.abs(rec.u.values - ground_unit.u.values)) / scale
        assert sup <= 1e-4
        assert rec.checks_passed
        assert 0.5 <= rec.meta["phi0"] <= 3.0
        assert abs(rec.meta["defect"]) <= 1e-8

    def test_general_mode_agrees(self, ref_spec, ground_unit):
        rec = match_shooting(ref_spec, (0.5, 3.0), ShootingConfig(mesh_n=512),
                             mode="general")
        scale = np.max(np.abs(ground_unit.u.values))
        assert np.max(np.abs(rec.u.values - ground_unit.u.values)) / scale <= 1e-4

    def test_odd_match_is_level_one_nodal(self, ref_spec, nodal1_unit):
        rec = match_shooting(ref_spec, (5.0, 30.0), ShootingConfig(mesh_n=512),
                             mode="odd")
        assert rec.nodal_count == 1
        assert rec.energy_J == pytest.approx(nodal1_unit.energy_J, rel=1e-3)
        anti = np.max(np.abs(rec.u.values + rec.u.values[::-1]))
        assert anti <= 1e-10 * np.max(np.abs(rec.u.values))

    def test_empty_bracket_raises(self, ref_spec):
        with pytest.raises(BracketError):
            match_shooting(ref_spec, (0.1, 0.2), ShootingConfig(mesh_n=256))


class TestNodal:
    def test_level_one(self, nodal1_unit, ground_unit):
        n1 = nodal1_unit
        assert n1.converged and n1.nodal_count == 1
        assert n1.residual_norm <= 1e-8
        assert n1.checks_passed
        assert n1.energy_J > ground_unit.energy_J
        assert n1.energy_J == pytest.approx(6.9594771890960185, rel=1e-6)
        assert n1.meta["interfaces"][0] == pytest.approx(math.pi / 2,
                                                         abs=0.01)

    def test_level_one_antisymmetry(self, nodal1_unit):
        vals = nodal1_unit.u.values
        anti = np.max(np.abs(vals + vals[::-1])) / np.max(np.abs(vals))
        assert anti < 1e-10

    def test_identities_hold(self, nodal1_unit):
        A, B, J = (nodal1_unit.quadratic, nodal1_unit.lq_mass,
                   nodal1_unit.energy_J)
        assert abs(A - B) / (A + B) <= 1e-8
        assert abs(J - (0.5 - 1.0 / 3.0) * B) <= 1e-6 * (1.0 + abs(J))

    def test_invalid_level_rejected(self, ref_spec):
        for level in (0, -1):
            with pytest.raises(ValueError):
                solve_nodal(ref_spec, level, SolverConfig(mesh_n=64))

    def test_too_many_interfaces_for_mesh(self, ref_spec):
        with pytest.raises(NodalCollapseError):
            solve_nodal(ref_spec, 50, SolverConfig(mesh_n=16))


class TestSweep:
    def make_specs(self, pole_profile, k_values):
        return [ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                            k=ConstantPotential(k)) for k in k_values]

    def test_family_maxima(self, pole_profile):
        specs = self.make_specs(pole_profile, [0.5, 1.0, 1.5])
        report = c0_bound_sweep(specs, SolverConfig(mesh_n=256))
        assert report.all_converged
        maxima = [e.max_value for e in report.entries]
        assert all(math.isfinite(v) for v in maxima)
        assert maxima == sorted(maxima)
        assert report.family_max == pytest.approx(max(maxima))

    def test_noncoercive_member_reported_not_fatal(self, pole_profile):
        specs = self.make_specs(pole_profile, [1.0, -2.0])
        report = c0_bound_sweep(specs, SolverConfig(mesh_n=256))
        assert not report.all_converged
        assert report.entries[0].converged
        assert not report.entries[1].converged
        assert report.entries[1].error
        assert math.isfinite(report.family_max)

    def test_parallel_matches_serial(self, pole_profile):
        specs = self.make_specs(pole_profile, [0.5, 1.0, 1.5])
        serial = c0_bound_sweep(specs, SolverConfig(mesh_n=256), workers=1)
        parallel = c0_bound_sweep(specs, SolverConfig(mesh_n=256), workers=2)
        assert [e.max_value for e in parallel.entries] == \
            [e.max_value for e in serial.entries]

    def test_exponent_diagnostic(self, pole_profile):
        specs = self.make_specs(pole_profile, [1.0])
        report = c0_bound_sweep(specs, SolverConfig(mesh_n=256),
                                q_values=[3.0, 3.5])
        assert report.q_diagnostic
        qs = [row.q for row in report.q_diagnostic]
        assert qs == [3.0, 3.5]


class TestSignChanges:
    def test_counts(self):
        assert count_sign_changes(np.array([1.0, 2.0, 3.0])) == 0
        assert count_sign_changes(np.array([1.0, -1.0])) == 1
        assert count_sign_changes(np.array([1.0, 0.0, -1.0])) == 1
        assert count_sign_changes(np.array([1.0, -1.0, 1.0])) == 2

    def test_noise_floor(self):
        assert count_sign_changes(np.array([1.0, -1e-14, 1.0])) == 0
