"""Ground-state and sign-changing solvers for a reduced singular equation.

The library computes solutions of

    phi'' - m(t) phi' - k(t) phi + |phi|^(q-2) phi / d(t)^s = 0

on an interval [0, D], where m is the mean-curvature profile of an
isoparametric level structure, d(t) = min(t, D - t) the distance to the
singular endpoints, and the level-volume weight V (with V'/V = -m) turns
the equation into the Euler-Lagrange equation of a weighted variational
problem.  Two independent solver routes (variational and shooting), a
verification oracle, and a batch CLI are provided.
"""

__version__ = "0.1.0"

from .geometry import (
    AsymptoticsError,
    AsymptoticsReport,
    ExponentGate,
    IsoparametricData,
    IsoparametricProfile,
    SubcriticalityError,
    critical_exponent,
    profile_from_ab,
    profile_from_table,
    sphere_tube_profile,
    validate_asymptotics,
)
from .function_space import (
    CoercivityCertificate,
    CoercivityError,
    ConstantPotential,
    GradedMesh,
    GridFunction,
    ProblemSpec,
    TablePotential,
    coercivity_check,
    energy_J,
    gradient_J,
    h1v_norm_sq,
    hardy_quotient,
    quadratic_energy,
    rayleigh_Q,
    residual,
    singular_mass,
    weighted_lq_norm,
)
from .solvers import (
    BracketError,
    ConvergenceError,
    NodalCollapseError,
    ShootState,
    ShootingConfig,
    SolutionRecord,
    SolverConfig,
    SweepEntry,
    SweepReport,
    c0_bound_sweep,
    count_sign_changes,
    match_shooting,
    minimize_Q,
    nehari_rescale,
    shoot_from_zero,
    solve_nodal,
    startup_series,
)
from .oracle import (
    CheckResult,
    HolderFit,
    VerificationReport,
    bump_concentration,
    embedding_battery,
    fd_residual_oracle,
    holder_fit,
    observed_order,
)

__all__ = [
    "__version__",
    # geometry
    "AsymptoticsError", "AsymptoticsReport", "ExponentGate",
    "IsoparametricData", "IsoparametricProfile", "SubcriticalityError",
    "critical_exponent", "profile_from_ab", "profile_from_table",
    "sphere_tube_profile", "validate_asymptotics",
    # function space
    "CoercivityCertificate", "CoercivityError", "ConstantPotential",
    "GradedMesh", "GridFunction", "ProblemSpec", "TablePotential",
    "coercivity_check", "energy_J", "gradient_J", "h1v_norm_sq",
    "hardy_quotient", "quadratic_energy", "rayleigh_Q", "residual",
    "singular_mass", "weighted_lq_norm",
    # solvers
    "BracketError", "ConvergenceError", "NodalCollapseError", "ShootState",
    "ShootingConfig", "SolutionRecord", "SolverConfig", "SweepEntry",
    "SweepReport", "c0_bound_sweep", "count_sign_changes", "match_shooting",
    "minimize_Q", "nehari_rescale", "shoot_from_zero", "solve_nodal",
    "startup_series",
    # oracle
    "CheckResult", "HolderFit", "VerificationReport", "bump_concentration",
    "embedding_battery", "fd_residual_oracle", "holder_fit",
    "observed_order",
]
