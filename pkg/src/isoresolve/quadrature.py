"""Quadrature rules for cells with power-law endpoint weights.

Interior cells use plain Gauss-Legendre points with the measure evaluated
pointwise.  Cells touching a singular endpoint use Gauss-Jacobi points so
that the power-law factor t^alpha of the measure is integrated exactly and
only the smooth regular part is sampled.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_jacobi

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_GJ_CACHE: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    if npts not in _GL_CACHE:
        _GL_CACHE[npts] = np.polynomial.legendre.leggauss(npts)
    return _GL_CACHE[npts]


def legendre_cell(a: float, b: float, npts: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on the cell [a, b]."""
    x, w = gauss_legendre(npts)
    h = b - a
    return a + 0.5 * h * (x + 1.0), 0.5 * h * w


def power_cell(h: float, alpha: float, npts: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, h] for integrals int_0^h g(t) t^alpha dt.

    The returned weights absorb the t^alpha factor exactly: sum w_i g(t_i)
    reproduces int g t^alpha dt exactly for polynomial g up to degree
    2*npts - 1.  Requires alpha > -1.
    """
    if alpha <= -1.0:
        raise ValueError(f"power weight exponent must exceed -1, got {alpha}")
    key = (npts, float(alpha))
    if key not in _GJ_CACHE:
        # Jacobi weight (1-x)^0 (1+x)^alpha on [-1, 1].
        _GJ_CACHE[key] = roots_jacobi(npts, 0.0, alpha)
    x, w = _GJ_CACHE[key]
    t = 0.5 * h * (x + 1.0)
    return t, (0.5 * h) ** (alpha + 1.0) * w


def geometric_panels(lo: float, hi: float, n_panels: int) -> np.ndarray:
    """Panel breakpoints accumulating geometrically toward lo."""
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    return np.geomspace(lo, hi, n_panels + 1)


def panel_integrals(func, breakpoints: np.ndarray, npts: int = 8) -> np.ndarray:
    """Integral of func over each consecutive panel, Gauss-Legendre per panel."""
    x, w = gauss_legendre(npts)
    a = breakpoints[:-1]
    h = np.diff(breakpoints)
    # nodes: (n_panels, npts)
    t = a[:, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)
    vals = func(t.ravel()).reshape(t.shape)
    return 0.5 * h * (vals @ w)
