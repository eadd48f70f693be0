"""Independent verification oracles for computed solutions.

Every check here re-derives its quantity from scratch: strong-form residuals
by divided differences at the solution's own nodes, Holder exponents by
log-log fits, convergence orders by Richardson comparison, and embedding and
Hardy constants by randomized batteries.  None of it reuses the weak-form
assembly in :mod:`isoresolve.function_space`, so agreement between the two is
evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .function_space import (
    GridFunction,
    ProblemSpec,
    h1v_norm_sq,
    hardy_quotient,
    weighted_lq_norm,
)

__all__ = [
    "CheckResult",
    "VerificationReport",
    "divided_differences",
    "fd_residual_oracle",
    "HolderFit",
    "holder_fit",
    "observed_order",
    "embedding_battery",
    "bump_concentration",
]


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class CheckResult:
    """One named verification check with its measured value and verdict.

    ``description`` states the property being checked in words, so a report
    is readable without the code at hand.
    """

    name: str
    description: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
            "note": self.note,
        }

    def __str__(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        line = (f"[{tag}] {self.name}: value={self.value:.6g} "
                f"threshold={self.threshold:.6g}")
        if self.note:
            line += f" ({self.note})"
        return line


@dataclass
class VerificationReport:
    """Append-only collection of named checks plus free-form numeric data."""

    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def merge(self, other: "VerificationReport", prefix: str = "") -> None:
        """Append all checks of ``other``, optionally prefixing their names."""
        for check in other.checks:
            if prefix:
                check = replace(check, name=f"{prefix}{check.name}")
            self.checks.append(check)
        if other.data:
            key = prefix.rstrip(".-_") or "merged"
            self.data[key] = other.data

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def summary(self) -> str:
        lines = [str(check) for check in self.checks]
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"report: {verdict} ({len(self.checks)} checks)")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "data": self.data,
        }


# ---------------------------------------------------------------------------
# strong-form residual


def divided_differences(t: np.ndarray, y: np.ndarray):
    """First and second derivative estimates at interior nodes.

    Three-point stencils on a nonuniform grid; second order on smoothly
    graded node families.  Returns ``(d1, d2)`` for nodes ``t[1:-1]``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    denom = hm * hp * (hm + hp)
    d1 = (hm * hm * y[2:] + (hp * hp - hm * hm) * y[1:-1]
          - hp * hp * y[:-2]) / denom
    d2 = 2.0 * (hm * y[2:] - (hm + hp) * y[1:-1] + hp * y[:-2]) / denom
    return d1, d2


def fd_residual_oracle(u: GridFunction, spec: ProblemSpec,
                       window: tuple = (0.05, 0.95)) -> float:
    """Sup norm of the strong-form residual on an interior window.

    The residual ``phi'' - m phi' - k phi + |phi|^(q-2) phi / d^s`` is
    assembled from divided differences at the nodes of ``u`` whose
    coordinates lie in ``[window[0]*D, window[1]*D]``.  The window excludes
    the endpoints, where the solution is Holder continuous but not twice
    differentiable, so the strong form only holds in the interior.
    """
    t = u.mesh.nodes
    y = u.values
    d1, d2 = divided_differences(t, y)
    ti = t[1:-1]
    D = spec.profile.D
    mask = (ti >= window[0] * D) & (ti <= window[1] * D)
    if not mask.any():
        raise ValueError("no interior nodes inside the residual window")
    ti = ti[mask]
    yi = y[1:-1][mask]
    mt = np.asarray(spec.profile.m(ti), dtype=float)
    kt = np.asarray(spec.k(ti), dtype=float)
    dist = spec.profile.distance(ti)
    nonlinear = np.abs(yi) ** (spec.q - 2.0) * yi / dist ** spec.s
    res = d2[mask] - mt * d1[mask] - kt * yi + nonlinear
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Holder exponent at the singular endpoint


@dataclass
class HolderFit:
    """Least-squares endpoint exponent of ``phi(0) - phi(t) ~ C t^beta``."""

    exponent: float
    expected: float
    fit_residual: float
    n_points: int
    ok: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "exponent": float(self.exponent),
            "expected": float(self.expected),
            "fit_residual": float(self.fit_residual),
            "n_points": int(self.n_points),
            "ok": bool(self.ok),
            "note": self.note,
        }


def holder_fit(u: GridFunction, s: float, *, decade: float = 10.0,
               min_points: int = 4) -> HolderFit:
    """Fit the endpoint modulus of continuity of ``u`` near ``t = 0``.

    Fits ``log(phi(0) - phi(t))`` against ``log t`` over the first decade of
    interior nodes ``t in [t_1, decade * t_1]`` and returns the slope.  The
    expected value for a solution with a local max at the singular endpoint
    is ``2 - s`` from the startup expansion; the fitted slope should agree
    with it well inside the admissible Holder range.
    """
    t = u.mesh.nodes
    y = u.values
    expected = 2.0 - s
    hi = decade * t[1]
    idx = np.nonzero((t > 0.0) & (t <= hi))[0]
    if idx.size < min_points:
        idx = np.arange(1, min(min_points + 1, t.size - 1))
    increments = y[0] - y[idx]
    if idx.size < 2 or np.any(increments <= 0.0):
        return HolderFit(math.nan, expected, math.nan, int(idx.size), False,
                         "nonpositive increments: fit undefined")
    log_t = np.log(t[idx])
    log_inc = np.log(increments)
    coef = np.polyfit(log_t, log_inc, 1)
    fitted = np.polyval(coef, log_t)
    fit_residual = float(np.sqrt(np.mean((log_inc - fitted) ** 2)))
    return HolderFit(float(coef[0]), expected, fit_residual, int(idx.size),
                     True)


# ---------------------------------------------------------------------------
# grid-refinement order


def observed_order(coarse: float, mid: float, fine: float) -> float:
    """Richardson order estimate from one value on meshes N, 2N and 4N.

    Returns ``log2(|coarse - mid| / |mid - fine|)``; infinite when the fine
    pair already agrees to round-off.
    """
    e_coarse = abs(coarse - mid)
    e_fine = abs(mid - fine)
    if e_fine == 0.0 or e_coarse == 0.0:
        return math.inf
    return math.log2(e_coarse / e_fine)


# ---------------------------------------------------------------------------
# randomized embedding and Hardy batteries


def _battery_suprema(spec: ProblemSpec, coeffs: np.ndarray, n_cells: int):
    """Empirical suprema of the embedding ratio and Hardy quotient."""
    mesh = spec.build_mesh(n_cells)
    modes = coeffs.shape[1]
    freq = np.arange(1, modes + 1, dtype=float)
    phases = np.sin(np.outer(freq, np.pi * mesh.nodes / spec.profile.D))
    sup_embed = 0.0
    sup_hardy = 0.0
    for c in coeffs:
        u = GridFunction(mesh, c @ phases)
        denom = math.sqrt(h1v_norm_sq(u, spec))
        sup_embed = max(sup_embed, weighted_lq_norm(u, spec) / denom)
        sup_hardy = max(sup_hardy, hardy_quotient(u, spec))
    return sup_embed, sup_hardy


def embedding_battery(spec: ProblemSpec, trials: int, *, seed: int = 0,
                      mesh_n: int = 512, modes: int = 10,
                      drift_tol: float = 0.05) -> VerificationReport:
    """Randomized finiteness battery for the embedding and Hardy constants.

    Draws ``trials`` band-limited sine fields with ``modes`` modes and a
    fixed-seed generator, measures the ratio of the weighted Lq norm to the
    H1(V) norm and the Hardy quotient, and reports the empirical suprema on
    a mesh of ``mesh_n`` cells and on its refinement by 2.  Both suprema
    must be finite and stable under refinement (relative drift at most
    ``drift_tol``).  ``trials = 0`` returns an empty report.
    """
    report = VerificationReport()
    if trials <= 0:
        return report
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((trials, modes))
    coarse = _battery_suprema(spec, coeffs, mesh_n)
    fine = _battery_suprema(spec, coeffs, 2 * mesh_n)
    report.data.update({
        "trials": int(trials),
        "modes": int(modes),
        "seed": int(seed),
        "mesh_n": [int(mesh_n), int(2 * mesh_n)],
        "embedding_sup": [coarse[0], fine[0]],
        "hardy_sup": [coarse[1], fine[1]],
    })
    quantities = (
        ("embedding", "ratio of the weighted Lq norm to the H1(V) norm over "
         "random band-limited fields"),
        ("hardy", "Hardy quotient (distance-weighted L2 mass over the H1(V) "
         "norm) over random band-limited fields"),
    )
    for i, (label, words) in enumerate(quantities):
        value_fine = fine[i]
        report.add(CheckResult(
            name=f"{label}-sup-finite",
            description=f"empirical supremum of the {words} is finite",
            value=value_fine,
            threshold=math.inf,
            passed=bool(math.isfinite(value_fine)),
        ))
        drift = abs(fine[i] - coarse[i]) / max(fine[i], 1e-300)
        report.add(CheckResult(
            name=f"{label}-drift",
            description=f"empirical supremum of the {words} is stable under "
                        "mesh refinement",
            value=drift,
            threshold=drift_tol,
            passed=bool(drift <= drift_tol),
        ))
    return report


def bump_concentration(spec: ProblemSpec, scales=None, *,
                       mesh_n: int = 8192) -> dict:
    """Embedding-ratio growth for bumps concentrating at the singular end.

    Evaluates the ratio ``|phi|_{Lq(d^-s)} / |phi|_{H1(V)}`` for the
    Gaussian family ``phi_eps(t) = exp(-(t/eps)^2)``.  For exponents above
    the critical gate the ratio grows without bound as ``eps`` shrinks,
    which is the sharpness diagnostic for the embedding; for admissible
    exponents it stays bounded.  Returns the scales, the ratios and the
    overall growth factor ``ratios[-1] / ratios[0]``.
    """
    D = spec.profile.D
    if scales is None:
        scales = [5e-2 * D, 5e-3 * D, 5e-4 * D]
    mesh = spec.build_mesh(mesh_n)
    t = mesh.nodes
    ratios = []
    for eps in scales:
        u = GridFunction(mesh, np.exp(-((t / eps) ** 2)))
        ratio = weighted_lq_norm(u, spec) / math.sqrt(h1v_norm_sq(u, spec))
        ratios.append(float(ratio))
    return {
        "scales": [float(eps) for eps in scales],
        "ratios": ratios,
        "growth": float(ratios[-1] / ratios[0]),
    }
