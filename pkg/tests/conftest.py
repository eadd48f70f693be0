"""Shared fixtures: the reference problem at unit-test mesh resolution.

Expensive solves are session-scoped so each record is computed once and
reused across test modules.  Unit tests run at N=512; the acceptance module
re-solves at the full reference resolution itself.
"""

import numpy as np
import pytest

from isoresolve import (
    ConstantPotential,
    GradedMesh,
    ProblemSpec,
    SolverConfig,
    minimize_Q,
    solve_nodal,
    sphere_tube_profile,
)

N_UNIT = 512

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pole_profile():
    """Geodesic-ball profile on the round 4-sphere (both ends are poles)."""
    return sphere_tube_profile(4, 0)


@pytest.fixture(scope="session")
def ref_spec(pole_profile):
    """Reference problem: n=4 pole profile, k = 1, s = 0.5, q = 3."""
    return ProblemSpec(profile=pole_profile, q=3.0, s=0.5,
                       k=ConstantPotential(1.0))


@pytest.fixture(scope="session")
def unit_mesh(ref_spec):
    return GradedMesh(ref_spec.profile, ref_spec.s, N_UNIT)


@pytest.fixture(scope="session")
def ground_unit(ref_spec):
    """Positive ground state of the reference problem at N=512."""
    return minimize_Q(ref_spec, SolverConfig(mesh_n=N_UNIT))


@pytest.fixture(scope="session")
def nodal1_unit(ref_spec):
    """Level-1 sign-changing solution of the reference problem at N=512."""
    return solve_nodal(ref_spec, 1, SolverConfig(mesh_n=N_UNIT))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def write_config(path, mesh_n=128, extra=""):
    """Write a small TOML config for the reference problem."""
    text = (
        "[profile]\n"
        'kind = "sphere_tube"\n'
        "n = 4\n"
        "d0 = 0\n"
        "\n"
        "[problem]\n"
        "q = 3.0\n"
        "s = 0.5\n"
        "\n"
        "[potential]\n"
        'kind = "constant"\n'
        "value = 1.0\n"
        "\n"
        "[solver]\n"
        f"mesh_n = {mesh_n}\n"
        + extra
    )
    path.write_text(text)
    return path
