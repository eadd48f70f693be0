"""Isoparametric geometry inputs for the reduced one-dimensional problem.

A profile bundles the dimension data (n, d0, d1), the focal distance D, the
mean-curvature function m(t) of the level sets, and the level-volume weight
V(t) with V'(t)/V(t) = -m(t), normalized so V(D/2) = 1.

m blows up like -(n-d0-1)/t at t=0 and like +(n-d1-1)/(D-t) at t=D, so V
vanishes like t^(n-d0-1) and (D-t)^(n-d1-1).  The weight is built once per
profile by composite Gauss quadrature of the bounded remainder m + nu/t on
geometrically graded panels, never by differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .quadrature import gauss_legendre, geometric_panels, panel_integrals


class AsymptoticsError(RuntimeError):
    """Reconstructed profile failed its endpoint-asymptotics validation."""


class SubcriticalityError(ValueError):
    """Exponent q violates the admissibility gate for the given geometry."""


# ---------------------------------------------------------------------------
# mean-curvature evaluators (top-level classes so profiles pickle cleanly)


class SphereTubeCurvature:
    """m(t) = -(n-d0-1)/tan(t) + d0*tan(t) for tubes about a round subsphere."""

    def __init__(self, n: int, d0: int):
        self.nu0 = n - d0 - 1
        self.d0 = d0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = -self.nu0 / np.tan(t)
        if self.d0:
            out = out + self.d0 * np.tan(t)
        return out


class _ArclengthHalf:
    """Cumulative arclength t(w) for f = f_end + sign * w^2 and its inverse.

    The integrand 2 w / sqrt(b(f_end + sign w^2)) is smooth through the simple
    root of b.  The inverse w(t) is a linear-interpolation seed refined by two
    Newton steps against the exact cumulative integral, so its accuracy is
    limited only by the accuracy of b itself.
    """

    def __init__(self, b: Callable, f_end: float, sign: float, w_max: float,
                 n_grid: int = 1024):
        self.b, self.f_end, self.sign = b, f_end, sign
        self.w_grid = np.linspace(0.0, w_max, n_grid + 1)
        gx, gw = gauss_legendre(8)
        self._gx, self._gw = gx, gw
        a = self.w_grid[:-1]
        h = np.diff(self.w_grid)
        omega = a[:, None] + 0.5 * h[:, None] * (gx[None, :] + 1.0)
        vals = self._integrand(omega.ravel()).reshape(omega.shape)
        self.t_grid = np.concatenate(([0.0], np.cumsum(0.5 * h * (vals @ gw))))

    def _integrand(self, w):
        f = self.f_end + self.sign * np.asarray(w, dtype=float) ** 2
        return 2.0 * w / np.sqrt(np.maximum(np.asarray(self.b(f), dtype=float),
                                            1e-300))

    @property
    def t_max(self) -> float:
        return float(self.t_grid[-1])

    def t_of_w(self, w: np.ndarray) -> np.ndarray:
        """Exact-cumulative arclength at arbitrary w."""
        w = np.clip(w, 0.0, self.w_grid[-1])
        j = np.clip(np.searchsorted(self.w_grid, w, side="right") - 1, 0,
                    len(self.w_grid) - 2)
        a = self.w_grid[j]
        h = w - a
        nodes = a[None, :] + 0.5 * h[None, :] * (self._gx[:, None] + 1.0)
        part = 0.5 * h * (self._gw @ self._integrand(nodes.ravel())
                          .reshape(nodes.shape))
        return self.t_grid[j] + part

    def w_of_t(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.t_max)
        w = np.interp(t, self.t_grid, self.w_grid)
        for _ in range(2):
            g = self._integrand(np.maximum(w, 1e-300))
            pos = g > 0
            w = np.where(pos, w - (self.t_of_w(w) - t) / np.where(pos, g, 1.0), w)
            w = np.clip(w, 0.0, self.w_grid[-1])
        return w


class ReconstructedCurvature:
    """m(t) = (b'(f) + 2 a(f)) / (2 sqrt(b(f))) through the arclength map t(f).

    Near each endpoint the level is tracked as f = f_end -+ w^2, which keeps
    the substitution smooth across the simple root of b.
    """

    def __init__(self, a, b, db, left: _ArclengthHalf, right: _ArclengthHalf):
        self.a = a
        self.b = b
        self.db = db
        self.left = left
        self.right = right
        self.f_lo = left.f_end
        self.f_hi = right.f_end
        self.t_join = left.t_max
        self.D = left.t_max + right.t_max

    def level_value(self, t):
        """f(t), the isoparametric level through distance t."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        f = np.empty_like(t)
        is_l = t <= self.t_join
        if np.any(is_l):
            w = self.left.w_of_t(t[is_l])
            f[is_l] = self.f_lo + w ** 2
        if np.any(~is_l):
            v = self.right.w_of_t(np.maximum(self.D - t[~is_l], 0.0))
            f[~is_l] = self.f_hi - v ** 2
        return f[0] if scalar else f

    def __call__(self, t):
        f = self.level_value(t)
        bb = np.maximum(np.asarray(self.b(f), dtype=float), 1e-300)
        return ((np.asarray(self.db(f), dtype=float)
                 + 2.0 * np.asarray(self.a(f), dtype=float))
                / (2.0 * np.sqrt(bb)))


# ---------------------------------------------------------------------------
# level-volume weight


class _HalfWeight:
    """Antiderivative machinery for one half of the weight.

    Stores prefix integrals of the bounded remainder over geometric panels so
    that int_t^{D/2} (m(tau) + nu/tau) dtau is one short Gauss rule away for
    any t, vectorized.
    """

    def __init__(self, remainder: Callable, breaks: np.ndarray):
        self.remainder = remainder
        self.breaks = breaks
        vals = panel_integrals(remainder, self.breaks)
        # suffix[i] = integral from breaks[i] to hi
        self.suffix = np.concatenate((np.cumsum(vals[::-1])[::-1], [0.0]))
        self._gx, self._gw = gauss_legendre(8)

    def integral_to_hi(self, t: np.ndarray) -> np.ndarray:
        """int_t^{hi} remainder, for t in (0, hi]; frozen below the panel floor."""
        t = np.clip(t, self.breaks[0], self.breaks[-1])
        j = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0,
                    len(self.breaks) - 2)
        a = self.breaks[j]
        h = t - a
        nodes = a[None, :] + 0.5 * h[None, :] * (self._gx[:, None] + 1.0)
        part = 0.5 * h * (self._gw @ self.remainder(nodes.ravel()).reshape(nodes.shape))
        return self.suffix[j] - part


class _Remainder0:
    def __init__(self, m, nu0):
        self.m, self.nu0 = m, nu0

    def __call__(self, t):
        return self.m(t) + self.nu0 / t


class _Remainder1:
    def __init__(self, m, nu1, D):
        self.m, self.nu1, self.D = m, nu1, D

    def __call__(self, tau):
        # tau = D - t measures distance to the far focal set
        return -np.asarray(self.m(self.D - tau)) + self.nu1 / tau


class LevelVolumeWeight:
    """V(t) with (log V)' = -m, V(D/2) = 1, and factored endpoint behavior.

    V(t) = (2t/D)^nu0 * regular0(t) on (0, D/2] and
    V(t) = (2(D-t)/D)^nu1 * regular1(t) on [D/2, D), with both regular parts
    smooth and equal to 1 at the midpoint.
    """

    def __init__(self, m: Callable, D: float, nu0: int, nu1: int,
                 panel_floor: float = 1e-12, panels_per_decade: int = 16):
        self.D, self.nu0, self.nu1 = D, nu0, nu1
        lo = panel_floor * D
        hi = 0.5 * D
        n_geo = max(8, int(panels_per_decade * math.log10(hi / lo)))
        # Uniform panels beside the geometric ones keep the quadrature sharp
        # for remainders that are only piecewise smooth (tabulated profiles).
        breaks = np.unique(np.concatenate((
            geometric_panels(lo, hi, n_geo),
            np.linspace(lo, hi, 1025))))
        self._left = _HalfWeight(_Remainder0(m, nu0), breaks)
        self._right = _HalfWeight(_Remainder1(m, nu1, D), breaks)

    def regular0(self, t):
        """V(t) / t^nu0 times (D/2)^nu0, valid on (0, D/2]."""
        return np.exp(self._left.integral_to_hi(np.asarray(t, dtype=float)))

    def regular1(self, tau):
        """V(D - tau) / tau^nu1 times (D/2)^nu1, valid for tau in (0, D/2]."""
        return np.exp(self._right.integral_to_hi(np.asarray(tau, dtype=float)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        half = 0.5 * self.D
        left = t <= half
        tl = t[left]
        out[left] = (tl / half) ** self.nu0 * self.regular0(tl)
        tr = self.D - t[~left]
        out[~left] = (tr / half) ** self.nu1 * self.regular1(tr)
        return out[0] if scalar else out


# ---------------------------------------------------------------------------
# profile


class IsoparametricProfile:
    """Geometry data of a proper isoparametric function on a closed n-manifold.

    Parameters
    ----------
    n : ambient dimension.
    d0, d1 : dimensions of the two focal varieties, each at most n - 2.
    D : focal distance, the length of the reduced interval.
    m : callable mean-curvature function on (0, D), vectorized.
    panel_floor : relative floor for the weight construction panels.  Keep the
        default for closed-form m; reconstructed profiles use a larger floor
        because evaluating m + nu/t near the root of b is cancellation-limited.
    """

    def __init__(self, n: int, d0: int, d1: int, D: float, m: Callable,
                 name: str = "custom", panel_floor: float = 1e-9,
                 probe_floor: float = 1e-6):
        if n < 3:
            raise ValueError(f"need ambient dimension n >= 3, got {n}")
        for d in (d0, d1):
            if not 0 <= d <= n - 2:
                raise ValueError(
                    f"focal dimension {d} outside [0, {n - 2}]: profile not proper")
        if not D > 0:
            raise ValueError("focal distance must be positive")
        self.n, self.d0, self.d1, self.D = n, d0, d1, float(D)
        self.m = m
        self.name = name
        self.probe_floor = probe_floor
        self.weight = LevelVolumeWeight(m, self.D, self.nu0, self.nu1,
                                        panel_floor=panel_floor)
        self.symmetric = self._detect_symmetry()

    @property
    def nu0(self) -> int:
        return self.n - self.d0 - 1

    @property
    def nu1(self) -> int:
        return self.n - self.d1 - 1

    @property
    def k_f(self) -> int:
        """Lower focal dimension, the one that sets the critical exponent."""
        return min(self.d0, self.d1)

    def V(self, t):
        return self.weight(t)

    def distance(self, t):
        """Distance to the nearer focal variety, d(t) = min(t, D - t)."""
        t = np.asarray(t, dtype=float)
        return np.minimum(t, self.D - t)

    def _detect_symmetry(self) -> bool:
        if self.d0 != self.d1:
            return False
        ts = np.linspace(0.07, 0.93, 29) * self.D
        mt = np.asarray(self.m(ts))
        mr = np.asarray(self.m(self.D - ts))
        scale = np.max(np.abs(mt)) + 1.0 / self.D
        return bool(np.max(np.abs(mt + mr)) <= 1e-9 * scale)

    def __repr__(self):
        return (f"IsoparametricProfile({self.name}, n={self.n}, d0={self.d0}, "
                f"d1={self.d1}, D={self.D:.6g})")


def sphere_tube_profile(n: int, d0: int = 0) -> IsoparametricProfile:
    """Distance tubes about a round d0-subsphere of the round n-sphere.

    d0 = 0 gives the polar profile (D = pi, antipodal focal points); for
    d0 >= 1 the focal varieties are subspheres of dimensions d0 and
    n - 1 - d0 at distance D = pi/2.
    """
    if d0 == 0:
        d1, D = 0, math.pi
    else:
        d1, D = n - 1 - d0, 0.5 * math.pi
    m = SphereTubeCurvature(n, d0)
    return IsoparametricProfile(n, d0, d1, D, m,
                                name=f"sphere-tube(n={n},d0={d0})",
                                panel_floor=1e-12)


# ---------------------------------------------------------------------------
# reconstruction from first-integral data


@dataclass
class IsoparametricData:
    """First-integral data: |grad f|^2 = b(f) and (Laplacian f) = a(f).

    b must be positive on (f_lo, f_hi) with simple roots at both ends.
    db is optional; finite differences of b are used when absent.
    """

    a: Callable
    b: Callable
    f_lo: float
    f_hi: float
    db: Callable | None = None

    def db_or_fd(self) -> Callable:
        if self.db is not None:
            return self.db
        b, lo, hi = self.b, self.f_lo, self.f_hi
        h = 1e-6 * (hi - lo)

        def fd(f):
            f = np.asarray(f, dtype=float)
            fp = np.minimum(f + h, hi)
            fm = np.maximum(f - h, lo)
            return (np.asarray(b(fp)) - np.asarray(b(fm))) / (fp - fm)

        return fd


def profile_from_ab(data: IsoparametricData, n: int, d0: int, d1: int,
                    validate_tol: float = 1e-3) -> IsoparametricProfile:
    """Rebuild the reduced profile from first-integral data.

    The arclength map t(f) = int df/sqrt(b) is accumulated with the
    substitution f = f_end -+ w^2 near each simple root and inverted by
    Newton refinement.  The returned profile must pass validate_asymptotics;
    otherwise AsymptoticsError is raised.
    """
    f_lo, f_hi = data.f_lo, data.f_hi
    if not f_hi > f_lo:
        raise ValueError("need f_hi > f_lo")
    f_mid = 0.5 * (f_lo + f_hi)
    left = _ArclengthHalf(data.b, f_lo, +1.0, math.sqrt(f_mid - f_lo))
    right = _ArclengthHalf(data.b, f_hi, -1.0, math.sqrt(f_hi - f_mid))
    m = ReconstructedCurvature(data.a, data.b, data.db_or_fd(), left, right)
    # Probe floor 5e-4: evaluating m through sqrt(b) near the simple root is
    # limited to about ulp/b relative accuracy, which dominates the remainder
    # below this scale (measured on closed-form data).
    profile = IsoparametricProfile(n, d0, d1, m.D, m,
                                   name=f"reconstructed(n={n},d0={d0},d1={d1})",
                                   panel_floor=3e-5, probe_floor=5e-4)
    report = validate_asymptotics(profile, validate_tol)
    if not report.passed:
        raise AsymptoticsError(
            f"reconstructed profile fails asymptotics validation: {report.summary()}")
    return profile


def profile_from_table(path, n: int, d0: int, d1: int) -> IsoparametricProfile:
    """Profile from a 3-column text table of (f, a(f), b(f)) samples.

    Rows may be whitespace- or comma-separated; '#' starts a comment.  The
    table must cover the full level range with b = 0 at both ends.  Samples
    are interpolated by monotone cubics.
    """
    with open(path) as fh:
        head, head_at = "", 0
        for i, line in enumerate(fh):
            stripped = line.split("#", 1)[0].strip()
            if stripped:
                head, head_at = stripped, i
                break
    delim = "," if "," in head else None
    try:
        [float(tok) for tok in head.replace(",", " ").split()]
        skip = 0
    except ValueError:
        skip = head_at + 1  # header line
    table = np.loadtxt(path, delimiter=delim, comments="#", skiprows=skip,
                       ndmin=2)
    if table.shape[1] != 3:
        raise ValueError(
            f"expected 3 columns (f, a, b), got {table.shape[1]} in {path}")
    f, a, b = table[:, 0], table[:, 1], table[:, 2]
    order = np.argsort(f)
    f, a, b = f[order], a[order], b[order]
    if len(f) < 4:
        raise ValueError("need at least 4 table rows")
    a_i = PchipInterpolator(f, a, extrapolate=True)
    b_i = PchipInterpolator(f, b, extrapolate=True)
    data = IsoparametricData(a=a_i, b=b_i, f_lo=float(f[0]), f_hi=float(f[-1]),
                             db=b_i.derivative())
    return profile_from_ab(data, n, d0, d1)


# ---------------------------------------------------------------------------
# validation and the exponent gate


@dataclass
class AsymptoticsReport:
    passed: bool
    near0_remainders: np.ndarray
    near1_remainders: np.ndarray
    weight_consistency: float
    tol: float
    failures: list = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return "asymptotics ok"
        return "; ".join(self.failures)


def validate_asymptotics(profile: IsoparametricProfile,
                         tol: float = 1e-3) -> AsymptoticsReport:
    """Check the endpoint laws of m and the consistency of V.

    Verifies that the additive remainders m(t) + nu0/t and m(t) - nu1/(D-t)
    decay along a geometric ladder of probes and are below tol (scaled by D)
    at the finest ones, and that (log V)' + m vanishes at interior probes.
    A profile whose m carries a spurious constant offset fails the smallness
    check even though t*m alone would look correct.
    """
    D = profile.D

    def ladder(floor):
        n_probe = max(4, int(math.ceil(math.log2(0.1 / floor))) + 1)
        probes = 0.1 * D * 0.5 ** np.arange(n_probe)
        return probes[probes >= floor * D]

    # Probes approaching D are represented as D - tau with tau no smaller
    # than ~2e-5 D: below that the rounding of D - tau itself dominates the
    # remainder of any profile with a genuine pole at D.
    p0 = ladder(profile.probe_floor)
    p1 = ladder(max(profile.probe_floor, 2e-5))
    r0 = np.asarray(profile.m(p0)) + profile.nu0 / p0
    r1 = -np.asarray(profile.m(D - p1)) + profile.nu1 / p1

    failures = []
    for label, r in (("near-0", r0), ("near-D", r1)):
        mag = np.abs(r)
        # Remainder of a genuine profile decays at least linearly along the
        # halving ladder, so the extrapolated limit 2 r(t) - r(2t) cancels the
        # linear part; a spurious constant offset survives it unchanged.
        limit = abs(2.0 * r[-1] - r[-2]) * D
        if limit > tol:
            failures.append(
                f"{label} remainder limit {limit:.3e} above tol {tol:.1e}")
        tail = mag[mag.size // 2:]
        growth = tail[1:] > tail[:-1] * 1.001 + tol * 1e-3 / D
        if np.any(growth):
            failures.append(f"{label} remainder grows toward the endpoint")

    ts = np.linspace(0.05 * D, 0.95 * D, 37)
    h = 1e-5 * D
    logv = np.log(profile.V(np.concatenate((ts + h, ts - h))))
    dlogv = (logv[:ts.size] - logv[ts.size:]) / (2.0 * h)
    consistency = float(np.max(np.abs(dlogv + np.asarray(profile.m(ts)))) * D)
    if consistency > tol:
        failures.append(f"weight inconsistency {consistency:.3e} above tol {tol:.1e}")

    return AsymptoticsReport(passed=not failures, near0_remainders=r0,
                             near1_remainders=r1,
                             weight_consistency=consistency, tol=tol,
                             failures=failures)


@dataclass
class ExponentGate:
    """Admissibility gate for the superlinear exponent q."""

    s: float
    n_eff: int
    q_max: float  # math.inf when the effective dimension is at most 2

    @property
    def restricted(self) -> bool:
        return math.isfinite(self.q_max)

    def admissible(self, q: float) -> bool:
        return 2.0 < q < self.q_max

    def describe(self) -> str:
        if self.restricted:
            return f"2 < q < {self.q_max:.6g} (effective dimension {self.n_eff})"
        return f"q > 2 (effective dimension {self.n_eff} <= 2, no upper bound)"


def critical_exponent(profile: IsoparametricProfile, s: float) -> ExponentGate:
    """Critical exponent 2(n - k_f - s)/(n - k_f - 2) for the singular problem.

    k_f is the smaller focal dimension.  When n - k_f <= 2 the gate is
    unrestricted above 2.  s = 0 is admitted (classical, nonsingular case).
    """
    if not 0.0 <= s < 2.0:
        raise ValueError(f"singularity strength s must lie in [0, 2), got {s}")
    n_eff = profile.n - profile.k_f
    if n_eff > 2:
        q_max = 2.0 * (n_eff - s) / (n_eff - 2.0)
    else:
        q_max = math.inf
    return ExponentGate(s=s, n_eff=n_eff, q_max=q_max)
