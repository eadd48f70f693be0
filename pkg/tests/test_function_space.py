"""Discretization layer: graded mesh, weighted functionals, coercivity."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import eigh

from isoresolve import (
    ConstantPotential,
    GradedMesh,
    GridFunction,
    ProblemSpec,
    SubcriticalityError,
    TablePotential,
    coercivity_check,
    energy_J,
    h1v_norm_sq,
    hardy_quotient,
    quadratic_energy,
    rayleigh_Q,
    residual,
    singular_mass,
    sphere_tube_profile,
    weighted_lq_norm,
)
from isoresolve.function_space import h1v_gram, stiffness


class TestGradedMesh:
    def test_basic_shape(self, unit_mesh):
        m = unit_mesh
        assert m.n_nodes == m.n_cells + 1
        assert m.nodes[0] == 0.0
        assert m.nodes[-1] == m.profile.D
        assert m.nodes[m.n_cells // 2] == pytest.approx(m.profile.D / 2,
                                                        rel=1e-15)
        assert np.all(np.diff(m.nodes) > 0)

    def test_default_grading_exponent(self, unit_mesh):
        # gamma defaults to 2 / (2 - s)
        assert unit_mesh.gamma == pytest.approx(2.0 / 1.5, rel=1e-15)

    def test_mirror_is_exact(self, unit_mesh):
        m = unit_mesh
        left = m.nodes[: m.n_cells // 2]
        right = m.nodes[m.n_cells // 2 + 1:]
        np.testing.assert_array_equal(right[::-1], m.profile.D - left)

    def test_validation(self, pole_profile):
        with pytest.raises(ValueError):
            GradedMesh(pole_profile, 0.5, 7)
        with pytest.raises(ValueError):
            GradedMesh(pole_profile, 0.5, 4)
        with pytest.raises(ValueError):
            GradedMesh(pole_profile, 2.0, 64)
        with pytest.raises(ValueError):
            GradedMesh(pole_profile, 0.5, 64, gamma=0.5)


class TestGridFunction:
    def test_csv_round_trip(self, unit_mesh, tmp_path, rng):
        u = GridFunction(unit_mesh, rng.standard_normal(unit_mesh.n_nodes))
        path = tmp_path / "u.csv"
        u.to_csv(path)
        v = GridFunction.from_csv(path, unit_mesh)
        np.testing.assert_array_equal(v.values, u.values)

    def test_from_csv_rejects_other_mesh(self, unit_mesh, pole_profile,
                                         tmp_path):
        u = GridFunction(unit_mesh, np.ones(unit_mesh.n_nodes))
        path = tmp_path / "u.csv"
        u.to_csv(path)
        other = GradedMesh(pole_profile, 0.5, 256)
        with pytest.raises(ValueError):
            GridFunction.from_csv(path, other)

    def test_length_mismatch(self, unit_mesh):
        with pytest.raises(ValueError):
            GridFunction(unit_mesh, np.ones(5))


class TestWeightedFunctionals:
    def test_constant_lq_mass_matches_quadrature_oracle(self, ref_spec,
                                                        unit_mesh):
        one = GridFunction(unit_mesh, np.ones(unit_mesh.n_nodes))
        ref = quad(lambda t: np.sin(t) ** 3 / min(t, math.pi - t) ** 0.5,
                   0, math.pi, points=[math.pi / 2], limit=200)[0]
        assert singular_mass(one, ref_spec) == pytest.approx(ref, rel=1e-9)
        assert rayleigh_Q(one, ref_spec) == pytest.approx(
            (4.0 / 3.0) / ref ** (2.0 / 3.0), rel=1e-9)

    def test_unweighted_l2_norm_of_one(self, pole_profile):
        # int_0^pi sin^3 = 4/3
        spec = ProblemSpec(profile=pole_profile, q=2.0, s=0.0,
                           k=ConstantPotential(1.0))
        mesh = GradedMesh(pole_profile, 0.0, 512)
        one = GridFunction(mesh, np.ones(mesh.n_nodes))
        assert weighted_lq_norm(one, spec) == pytest.approx(
            math.sqrt(4.0 / 3.0), rel=1e-12)

    def test_hardy_quotient_of_distance(self, ref_spec, unit_mesh):
        m = unit_mesh
        d = GridFunction(m, np.minimum(m.nodes, m.profile.D - m.nodes))
        i2 = 2.0 * quad(lambda t: t ** 2 * np.sin(t) ** 3, 0, math.pi / 2)[0]
        ref = (4.0 / 3.0) / (4.0 / 3.0 + i2)
        assert hardy_quotient(d, ref_spec) == pytest.approx(ref, rel=1e-6)

    def test_zero_function_rejected(self, ref_spec, unit_mesh):
        zero = GridFunction(unit_mesh, np.zeros(unit_mesh.n_nodes))
        with pytest.raises(ValueError):
            rayleigh_Q(zero, ref_spec)
        with pytest.raises(ValueError):
            hardy_quotient(zero, ref_spec)

    def test_mesh_spec_consistency_enforced(self, ref_spec, pole_profile):
        mesh = GradedMesh(pole_profile, 0.0, 64)
        u = GridFunction(mesh, np.ones(mesh.n_nodes))
        with pytest.raises(ValueError):
            singular_mass(u, ref_spec)

    def test_reflection_invariance_is_bitwise(self, ref_spec, unit_mesh, rng):
        u = GridFunction(unit_mesh, rng.standard_normal(unit_mesh.n_nodes))
        ur = u.with_values(u.values[::-1].copy())
        for fn in (energy_J, quadratic_energy, singular_mass, h1v_norm_sq,
                   weighted_lq_norm):
            assert fn(u, ref_spec) == fn(ur, ref_spec)
        # The dual norm maps through a directional tridiagonal solve, so it
        # is reflection-invariant only to rounding.
        assert residual(u, ref_spec)[1] == pytest.approx(
            residual(ur, ref_spec)[1], rel=1e-12)

    def test_invariant_spectrum(self, pole_profile):
        # Generalized eigenvalues of (stiffness, volume mass) on the pole
        # profile are l (l + n - 1) = 0, 4, 10, 18, ...
        mesh = GradedMesh(pole_profile, 0.5, 128)
        kd, ko = stiffness(mesh)
        pd, po = h1v_gram(mesh)
        K = np.diag(kd) + np.diag(ko, 1) + np.diag(ko, -1)
        M = (np.diag(pd) + np.diag(po, 1) + np.diag(po, -1)) - K
        w = eigh(K, M, eigvals_only=True, subset_by_index=[0, 3])
        assert abs(w[0]) < 1e-8
        np.testing.assert_allclose(w[1:], [4.0, 10.0, 18.0], rtol=2e-3)


class TestProblemSpec:
    def test_admissibility_gate(self, pole_profile):
        spec = ProblemSpec(profile=pole_profile, q=2.9, s=1.0,
                           k=ConstantPotential(1.0))
        gate = spec.check_admissible()
        assert gate.q_max == pytest.approx(3.0)
        for q in (3.0, 3.2):
            bad = ProblemSpec(profile=pole_profile, q=q, s=1.0,
                              k=ConstantPotential(1.0))
            with pytest.raises(SubcriticalityError):
                bad.check_admissible()

    def test_construction_bounds(self, pole_profile):
        ProblemSpec(profile=pole_profile, q=2.0, s=0.0,
                    k=ConstantPotential(1.0))
        with pytest.raises(ValueError):
            ProblemSpec(profile=pole_profile, q=1.5, s=0.5,
                        k=ConstantPotential(1.0))
        with pytest.raises(ValueError):
            ProblemSpec(profile=pole_profile, q=3.0, s=2.0,
                        k=ConstantPotential(1.0))

    def test_table_potential(self, pole_profile, unit_mesh):
        t = np.linspace(0.0, math.pi, 201)
        pot = TablePotential(t, 1.0 + 0.0 * t)
        spec = ProblemSpec(profile=pole_profile, q=3.0, s=0.5, k=pot)
        one = GridFunction(unit_mesh, np.ones(unit_mesh.n_nodes))
        ref_spec = ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                               k=ConstantPotential(1.0))
        assert quadratic_energy(one, spec) == pytest.approx(
            quadratic_energy(one, ref_spec), rel=1e-12)


class TestCoercivity:
    def test_unit_potential(self, ref_spec):
        cert = coercivity_check(ref_spec)
        assert cert.passed
        assert cert.lambda_min == pytest.approx(1.0, rel=1e-9)

    def test_zero_potential_not_coercive(self, pole_profile):
        spec = ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                           k=ConstantPotential(0.0))
        cert = coercivity_check(spec)
        assert not cert.passed
        assert abs(cert.lambda_min) < 1e-6

    def test_half_gap_potential_floor_is_minus_two(self, pole_profile):
        # With constant k = -2 the quotient is minimized by constants:
        # (0 - 2) / (0 + 1) = -2, strictly below zero, so the operator is
        # not coercive even though -2 exceeds minus the spectral gap -4.
        spec = ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                           k=ConstantPotential(-2.0))
        cert = coercivity_check(spec)
        assert not cert.passed
        assert cert.lambda_min == pytest.approx(-2.0, rel=1e-5)
