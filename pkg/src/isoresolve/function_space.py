"""Graded meshes, singular-aware quadrature, and the energy functionals.

The discrete space is continuous piecewise-linear functions on a graded mesh
of [0, D] with a node forced at D/2 (the kink of d(t) = min(t, D-t)).  Each
mesh carries quadrature data for the three measures V dt, V d^-s dt and
V d^-2 dt.  Interior cells use Gauss-Legendre points; the two endpoint cells
use Gauss-Jacobi points so the local power factor of V d^-p is integrated
exactly and only the smooth regular part of the weight is sampled.

Scalar functionals reduce with math.fsum, which is order-independent, so on
symmetric profiles with a symmetric potential every functional is exactly
invariant under the reflection t -> D - t (the mirrored half of the mesh
stores copies of the same floats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .geometry import (IsoparametricProfile, ExponentGate, SubcriticalityError,
                       critical_exponent)
from .quadrature import gauss_legendre, power_cell

N_GAUSS_INTERIOR = 4
N_GAUSS_ENDPOINT = 8
COERCIVITY_FLOOR = 1e-10


class CoercivityError(RuntimeError):
    """Quadratic form of the spec is not coercive on the discrete space."""


# ---------------------------------------------------------------------------
# potentials


class ConstantPotential:
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t):
        return np.full(np.shape(np.asarray(t)), self.value)

    def __repr__(self):
        return f"ConstantPotential({self.value})"


class TablePotential:
    """Monotone cubic interpolant through (t, k) samples, clamped at the ends."""

    def __init__(self, ts, ks):
        ts = np.asarray(ts, dtype=float)
        ks = np.asarray(ks, dtype=float)
        order = np.argsort(ts)
        self.t_lo, self.t_hi = float(ts[order][0]), float(ts[order][-1])
        self.interp = PchipInterpolator(ts[order], ks[order], extrapolate=True)

    def __call__(self, t):
        return self.interp(np.clip(np.asarray(t, dtype=float),
                                   self.t_lo, self.t_hi))


# ---------------------------------------------------------------------------
# mesh


@dataclass
class CellMeasure:
    """Quadrature data of one weighted measure over the whole mesh.

    qx : quadrature points; qw : weights including the measure density;
    cells : cell index of each point; wl, wr : P1 shape values of the left
    and right node of that cell at each point; cell_sums : total measure of
    each cell.
    """

    qx: np.ndarray
    qw: np.ndarray
    cells: np.ndarray
    wl: np.ndarray
    wr: np.ndarray
    cell_sums: np.ndarray

    def eval_p1(self, values: np.ndarray) -> np.ndarray:
        return values[self.cells] * self.wl + values[self.cells + 1] * self.wr

    def integrate(self, g_at_q: np.ndarray) -> float:
        return math.fsum(self.qw * g_at_q)

    def project_hats(self, g_at_q: np.ndarray, n_nodes: int) -> np.ndarray:
        gw = g_at_q * self.qw
        out = np.bincount(self.cells, gw * self.wl, minlength=n_nodes)
        out += np.bincount(self.cells + 1, gw * self.wr, minlength=n_nodes)
        return out

    def tridiag_mass(self, coeff_at_q, n_nodes: int):
        """Assemble the symmetric tridiagonal mass matrix with coefficient."""
        cw = self.qw if coeff_at_q is None else self.qw * coeff_at_q
        diag = np.bincount(self.cells, cw * self.wl * self.wl,
                           minlength=n_nodes)
        diag += np.bincount(self.cells + 1, cw * self.wr * self.wr,
                            minlength=n_nodes)
        off = np.bincount(self.cells, cw * self.wl * self.wr,
                          minlength=n_nodes - 1)
        return diag, off


def _endpoint_cell(width: float, nu: int, p: float, regular, scale: float):
    """Jacobi quadrature for the cell at a singular endpoint.

    Integrates g(t) t^(nu-p) regular(t) dt over [0, width] in local
    coordinates.  When nu - p <= -1 (only possible for the d^-2 measure with
    nu = 1) the power split keeps t^nu in the Jacobi weight and evaluates
    t^-p pointwise; the integrals against P1 hats remain finite because the
    hat vanishing at the endpoint supplies t^2.
    """
    alpha = nu - p
    if alpha > -1.0:
        qx, qw = power_cell(width, alpha, N_GAUSS_ENDPOINT)
        qw = qw * (scale * np.asarray(regular(qx), dtype=float))
    else:
        qx, qw = power_cell(width, float(nu), N_GAUSS_ENDPOINT)
        qw = qw * (scale * np.asarray(regular(qx), dtype=float)) * qx ** (-p)
    return qx, qw


class GradedMesh:
    """Symmetrically graded mesh with per-measure quadrature data."""

    def __init__(self, profile: IsoparametricProfile, s: float, n_cells: int,
                 gamma: float | None = None):
        if n_cells < 8 or n_cells % 2:
            raise ValueError("n_cells must be even and at least 8")
        if not 0.0 <= s < 2.0:
            raise ValueError(f"s must lie in [0, 2), got {s}")
        if gamma is None:
            gamma = 2.0 / (2.0 - s)
        if gamma < 1.0:
            raise ValueError("grading exponent must be at least 1")
        self.profile = profile
        self.s = float(s)
        self.gamma = float(gamma)
        self.n_cells = int(n_cells)

        D = profile.D
        half = n_cells // 2
        j = np.arange(half + 1, dtype=float)
        left = 0.5 * D * (j / half) ** gamma
        right = (D - left[:-1])[::-1]
        self.nodes = np.concatenate((left, right))
        h_left = np.diff(left)
        if profile.symmetric:
            h_right = h_left[::-1].copy()
        else:
            h_right = np.diff(self.nodes[half:])
        self.h = np.concatenate((h_left, h_right))

        self.measures: dict[str, CellMeasure] = {}
        for name, p in (("volume", 0.0), ("singular", self.s), ("hardy", 2.0)):
            self.measures[name] = self._build_measure(p)

    # -- construction helpers ------------------------------------------------

    def _left_block(self, p: float):
        """Quadrature arrays for cells 0..half-1 (d = t there)."""
        prof = self.profile
        D, half = prof.D, self.n_cells // 2
        nodes = self.nodes

        qx0, qw0 = _endpoint_cell(nodes[1], prof.nu0, p, prof.weight.regular0,
                                  (2.0 / D) ** prof.nu0)
        lam0 = qx0 / nodes[1]
        cells0 = np.zeros(qx0.size, dtype=np.int64)

        gx, gw = gauss_legendre(N_GAUSS_INTERIOR)
        a = nodes[1:half]
        h = self.h[1:half]
        qi = a[:, None] + 0.5 * h[:, None] * (gx[None, :] + 1.0)
        wi = 0.5 * h[:, None] * gw[None, :]
        mu = np.asarray(prof.V(qi.ravel()), dtype=float)
        if p:
            mu = mu * qi.ravel() ** (-p)
        qwi = wi.ravel() * mu
        lami = ((qi - a[:, None]) / h[:, None]).ravel()
        cellsi = np.repeat(np.arange(1, half, dtype=np.int64), N_GAUSS_INTERIOR)

        qx = np.concatenate((qx0, qi.ravel()))
        qw = np.concatenate((qw0, qwi))
        lam = np.concatenate((lam0, lami))
        cells = np.concatenate((cells0, cellsi))
        return qx, qw, lam, cells

    def _right_block_direct(self, p: float):
        """Quadrature arrays for cells half..N-1 built without mirroring."""
        prof = self.profile
        D, half, N = prof.D, self.n_cells // 2, self.n_cells
        nodes = self.nodes

        gx, gw = gauss_legendre(N_GAUSS_INTERIOR)
        a = nodes[half:N - 1]
        h = self.h[half:N - 1]
        qi = a[:, None] + 0.5 * h[:, None] * (gx[None, :] + 1.0)
        wi = 0.5 * h[:, None] * gw[None, :]
        mu = np.asarray(prof.V(qi.ravel()), dtype=float)
        if p:
            mu = mu * (D - qi.ravel()) ** (-p)
        qwi = wi.ravel() * mu
        lami = ((qi - a[:, None]) / h[:, None]).ravel()
        cellsi = np.repeat(np.arange(half, N - 1, dtype=np.int64),
                           N_GAUSS_INTERIOR)

        width = D - nodes[N - 1]
        tau, qwN = _endpoint_cell(width, prof.nu1, p, prof.weight.regular1,
                                  (2.0 / D) ** prof.nu1)
        qxN = D - tau
        lamN = (qxN - nodes[N - 1]) / self.h[N - 1]
        cellsN = np.full(qxN.size, N - 1, dtype=np.int64)

        qx = np.concatenate((qi.ravel(), qxN))
        qw = np.concatenate((qwi, qwN))
        lam = np.concatenate((lami, lamN))
        cells = np.concatenate((cellsi, cellsN))
        return qx, qw, lam, cells

    def _build_measure(self, p: float) -> CellMeasure:
        N = self.n_cells
        qx_l, qw_l, lam_l, cells_l = self._left_block(p)
        wl_l, wr_l = 1.0 - lam_l, lam_l
        if self.profile.symmetric:
            # Mirror copies: identical floats, so every symmetric reduction
            # over the two halves agrees bitwise.
            qx_r = self.profile.D - qx_l
            qw_r = qw_l.copy()
            cells_r = N - 1 - cells_l
            wl_r, wr_r = wr_l.copy(), wl_l.copy()
        else:
            qx_r, qw_r, lam_r, cells_r = self._right_block_direct(p)
            wl_r, wr_r = 1.0 - lam_r, lam_r
        qx = np.concatenate((qx_l, qx_r))
        qw = np.concatenate((qw_l, qw_r))
        cells = np.concatenate((cells_l, cells_r))
        wl = np.concatenate((wl_l, wl_r))
        wr = np.concatenate((wr_l, wr_r))
        cell_sums = np.bincount(cells, qw, minlength=N)
        return CellMeasure(qx=qx, qw=qw, cells=cells, wl=wl, wr=wr,
                           cell_sums=cell_sums)

    # -- public views --------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    def measure(self, name: str) -> CellMeasure:
        return self.measures[name]

    def distance(self, t):
        return self.profile.distance(t)

    def __repr__(self):
        return (f"GradedMesh(N={self.n_cells}, gamma={self.gamma:.4g}, "
                f"s={self.s}, profile={self.profile.name})")


# ---------------------------------------------------------------------------
# grid functions


@dataclass
class GridFunction:
    mesh: GradedMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"values shape {self.values.shape} does not match mesh "
                f"({self.mesh.n_nodes} nodes)")

    def __call__(self, t):
        return np.interp(t, self.mesh.nodes, self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.mesh.h

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.mesh, values)

    def to_csv(self, path) -> None:
        mesh = self.mesh
        t = mesh.nodes
        V = np.asarray(mesh.profile.V(np.clip(t, 1e-300, None)), dtype=float)
        V[0] = 0.0
        V[-1] = 0.0
        d = mesh.profile.distance(t)
        with open(path, "w") as fh:
            fh.write("t,phi,V,d\n")
            for row in zip(t, self.values, V, d):
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def from_csv(cls, path, mesh: GradedMesh) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] != mesh.n_nodes:
            raise ValueError(
                f"{path} has {data.shape[0]} rows, mesh has {mesh.n_nodes} nodes")
        if not np.allclose(data[:, 0], mesh.nodes, rtol=0, atol=1e-12 * mesh.profile.D):
            raise ValueError(f"{path} node coordinates do not match the mesh")
        return cls(mesh, data[:, 1])


# ---------------------------------------------------------------------------
# problem specification


@dataclass
class ProblemSpec:
    """Exponents, potential and geometry of one reduced problem."""

    profile: IsoparametricProfile
    q: float
    s: float
    k: object  # potential evaluator, callable on [0, D]

    def __post_init__(self):
        # Functionals are well defined for any q >= 2 (q = 2 is the plain
        # weighted L2 case and supercritical q is needed by criticality
        # diagnostics); the strict gate 2 < q < q_max is enforced where the
        # existence theory needs it, via check_admissible (solvers, CLI).
        if self.q < 2.0:
            raise SubcriticalityError(f"exponent q must be at least 2, got {self.q}")
        if not 0.0 <= self.s < 2.0:
            raise ValueError(f"singularity strength s must lie in [0, 2), got {self.s}")

    def gate(self) -> ExponentGate:
        return critical_exponent(self.profile, self.s)

    def check_admissible(self) -> ExponentGate:
        gate = self.gate()
        if not gate.admissible(self.q):
            raise SubcriticalityError(
                f"exponent q={self.q} inadmissible: requires {gate.describe()}")
        return gate

    def build_mesh(self, n_cells: int, gamma: float | None = None) -> GradedMesh:
        return GradedMesh(self.profile, self.s, n_cells, gamma)


def _check_mesh(u: GridFunction, spec: ProblemSpec) -> GradedMesh:
    mesh = u.mesh
    if mesh.s != spec.s:
        raise ValueError(
            f"mesh was built for s={mesh.s}, spec has s={spec.s}")
    if mesh.profile is not spec.profile and mesh.profile.name != spec.profile.name:
        raise ValueError("mesh profile does not match spec profile")
    return mesh


# ---------------------------------------------------------------------------
# tridiagonal helpers


def tridiag_apply(diag: np.ndarray, off: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def tridiag_solve(diag: np.ndarray, off: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return solve_banded((1, 1), ab, b)


def stiffness(mesh: GradedMesh):
    """Tridiagonal stiffness matrix of int phi' psi' V dt."""
    w = mesh.measure("volume").cell_sums / mesh.h ** 2
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += w
    diag[1:] += w
    return diag, -w


def h1v_gram(mesh: GradedMesh):
    """Tridiagonal Gram matrix of the H1(V) inner product."""
    kd, ko = stiffness(mesh)
    md, mo = mesh.measure("volume").tridiag_mass(None, mesh.n_nodes)
    return kd + md, ko + mo


# ---------------------------------------------------------------------------
# functionals


def quadratic_energy(u: GridFunction, spec: ProblemSpec) -> float:
    """int (phi'^2 + k phi^2) V dt."""
    mesh = _check_mesh(u, spec)
    vol = mesh.measure("volume")
    sl = u.slopes()
    grad_part = math.fsum(sl * sl * vol.cell_sums)
    kq = np.asarray(spec.k(vol.qx), dtype=float)
    phi = vol.eval_p1(u.values)
    return grad_part + math.fsum(vol.qw * kq * phi * phi)


def singular_mass(u: GridFunction, spec: ProblemSpec) -> float:
    """int |phi|^q d^-s V dt."""
    mesh = _check_mesh(u, spec)
    sing = mesh.measure("singular")
    phi = sing.eval_p1(u.values)
    return math.fsum(sing.qw * np.abs(phi) ** spec.q)


def weighted_lq_norm(u: GridFunction, spec: ProblemSpec) -> float:
    return singular_mass(u, spec) ** (1.0 / spec.q)


def h1v_norm_sq(u: GridFunction, spec: ProblemSpec) -> float:
    """int (phi'^2 + phi^2) V dt."""
    mesh = _check_mesh(u, spec)
    vol = mesh.measure("volume")
    sl = u.slopes()
    phi = vol.eval_p1(u.values)
    return (math.fsum(sl * sl * vol.cell_sums)
            + math.fsum(vol.qw * phi * phi))


def hardy_quotient(u: GridFunction, spec: ProblemSpec) -> float:
    """(int phi^2 d^-2 V) / (int (phi'^2 + phi^2) V)."""
    mesh = _check_mesh(u, spec)
    hardy = mesh.measure("hardy")
    phi = hardy.eval_p1(u.values)
    num = math.fsum(hardy.qw * phi * phi)
    den = h1v_norm_sq(u, spec)
    if den <= 0.0:
        raise ValueError("Hardy quotient undefined: zero H1(V) norm")
    return num / den


def rayleigh_Q(u: GridFunction, spec: ProblemSpec) -> float:
    B = singular_mass(u, spec)
    if B <= 0.0:
        raise ValueError("Rayleigh quotient undefined: zero weighted L^q mass")
    return quadratic_energy(u, spec) / B ** (2.0 / spec.q)


def energy_J(u: GridFunction, spec: ProblemSpec) -> float:
    return 0.5 * quadratic_energy(u, spec) - singular_mass(u, spec) / spec.q


def residual(u: GridFunction, spec: ProblemSpec):
    """Weak-form residual against the P1 hats and its H1(V)-dual norm.

    r_j = int (phi' psi_j' + k phi psi_j - |phi|^{q-2} phi d^-s psi_j) V dt.
    The dual norm is sqrt(r^T P^-1 r) with P the H1(V) Gram matrix.
    """
    mesh = _check_mesh(u, spec)
    if not np.all(np.isfinite(u.values)):
        raise ValueError("residual of non-finite grid function")
    vol = mesh.measure("volume")
    sing = mesh.measure("singular")
    n = mesh.n_nodes

    kd, ko = stiffness(mesh)
    r = tridiag_apply(kd, ko, u.values)
    kq = np.asarray(spec.k(vol.qx), dtype=float)
    phi_v = vol.eval_p1(u.values)
    r += vol.project_hats(kq * phi_v, n)
    phi_s = sing.eval_p1(u.values)
    r -= sing.project_hats(np.abs(phi_s) ** (spec.q - 2.0) * phi_s, n)

    pd, po = h1v_gram(mesh)
    riesz = tridiag_solve(pd, po, r)
    dual = math.sqrt(max(float(r @ riesz), 0.0))
    return GridFunction(mesh, r), dual


def gradient_J(u: GridFunction, spec: ProblemSpec) -> GridFunction:
    """H1(V)-Riesz representative of the first variation of the energy."""
    mesh = _check_mesh(u, spec)
    r, _ = residual(u, spec)
    pd, po = h1v_gram(mesh)
    return GridFunction(mesh, tridiag_solve(pd, po, r.values))


# ---------------------------------------------------------------------------
# coercivity


@dataclass
class CoercivityCertificate:
    lambda_min: float
    passed: bool
    n_cells: int
    floor: float = COERCIVITY_FLOOR

    def __str__(self):
        verdict = "coercive" if self.passed else "NOT coercive"
        return (f"{verdict}: min Rayleigh quotient {self.lambda_min:.6g} "
                f"on N={self.n_cells} (floor {self.floor:.1e})")


def coercivity_check(spec: ProblemSpec, mesh: GradedMesh | None = None,
                     n_cells: int = 256) -> CoercivityCertificate:
    """Smallest Rayleigh quotient of int (phi'^2 + k phi^2) V over H1(V).

    Solves the generalized eigenproblem A x = lambda B x with A the quadratic
    form and B the H1(V) Gram matrix by shift-invert from below.  The spec is
    coercive on the discrete space iff lambda_min is positive.
    """
    if mesh is None:
        mesh = spec.build_mesh(n_cells)
    vol = mesh.measure("volume")
    kd, ko = stiffness(mesh)
    md, mo = vol.tridiag_mass(None, mesh.n_nodes)
    kq = np.asarray(spec.k(vol.qx), dtype=float)
    ad, ao = vol.tridiag_mass(kq, mesh.n_nodes)
    A = diags([kd + ad, ko + ao, ko + ao], [0, 1, -1], format="csc")
    B = diags([kd + md, ko + mo, ko + mo], [0, 1, -1], format="csc")
    # Any generalized Rayleigh quotient is >= -max(0, -min k), so this sigma
    # sits strictly below the spectrum and shift-invert returns lambda_min.
    sigma = -(max(0.0, float(-kq.min())) + 1.0)
    vals = eigsh(A, k=1, M=B, sigma=sigma, which="LM",
                 return_eigenvectors=False)
    lam = float(vals[0])
    return CoercivityCertificate(lambda_min=lam, passed=lam > COERCIVITY_FLOOR,
                                 n_cells=mesh.n_cells)
