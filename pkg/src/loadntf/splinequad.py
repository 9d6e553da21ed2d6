"""Exact quadrature vectors and curvature-penalty matrices for cubic splines.

A cubic spline is fully determined by its values ``g`` at the knots, so its
integral and the integral of its squared second derivative are a linear and a
quadratic form in ``g``:

    integral of s          = v @ g
    integral of (s'')**2   = g @ Q @ g

Both hold exactly (up to round-off) for every spline of the class, not just
approximately.  The construction follows the classical second-difference /
overlap route: with ``gamma`` the knot second derivatives, first-derivative
continuity gives a tridiagonal system ``R gamma = D2 g`` (``D2`` the divided
second-difference operator), the penalty is ``gamma @ R @ gamma``, and the
integral is the trapezoid rule corrected by ``-sum h_i^3 (gamma_i +
gamma_{i+1}) / 24``.  Eliminating ``gamma`` turns both into closed forms in
``g``:

    Q = D2.T @ R^{-1} @ D2          (dense, symmetric, PSD)
    v = trapezoid - D2.T @ R^{-1} @ w

Two boundary classes are supported:

* natural: zero second derivative at the first and last knot, domain
  ``[t_1, t_K]``; ``Q`` annihilates affine data.
* periodic: value, slope and curvature continuous across the wrap of a period
  ``P``; the wrap spacing is ``P - t_last + t_first``; ``Q`` annihilates
  constants.

Grids are small here (tens of knots), so everything is dense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve

from .errors import InvalidGridError

NATURAL = "natural"
PERIODIC = "periodic"


@dataclass(frozen=True)
class SplineSystem:
    """Quadrature vector and curvature penalty for one spline class.

    Immutable after construction; the arrays are marked read-only so the
    system can be shared freely across threads.
    """

    grid: np.ndarray
    kind: str
    v: np.ndarray
    Q: np.ndarray
    period: float | None = None

    def __post_init__(self):
        for arr in (self.grid, self.v, self.Q):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.grid.size


@dataclass(frozen=True)
class SplinePair:
    """The two systems one fit needs: periodic intra-day, natural thermal."""

    intraday: SplineSystem
    temperature: SplineSystem


def _check_increasing(grid: np.ndarray, minimum: int, what: str) -> None:
    if grid.ndim != 1 or grid.size < minimum:
        raise InvalidGridError(f"{what} grid needs at least {minimum} knots, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise InvalidGridError(f"{what} grid has non-finite knots")
    if np.any(np.diff(grid) <= 0):
        raise InvalidGridError(f"{what} grid must be strictly increasing")


def natural_spline_system(grid) -> SplineSystem:
    """Build (v, Q) exact for every natural cubic spline on ``grid``.

    Parameters
    ----------
    grid : array_like, shape (K,)
        Strictly increasing knots, K >= 2.

    Returns
    -------
    SplineSystem
        ``v`` are the exact integral weights over ``[grid[0], grid[-1]]`` and
        ``Q`` the curvature-penalty matrix.  ``Q`` annihilates constants and
        the grid itself (affine splines have zero curvature).
    """
    grid = np.asarray(grid, dtype=float)
    _check_increasing(grid, 2, "natural")
    K = grid.size
    h = np.diff(grid)

    trap = np.zeros(K)
    trap[:-1] += h / 2
    trap[1:] += h / 2
    if K == 2:
        # two knots: the natural spline is affine, zero penalty
        return SplineSystem(grid=grid, kind=NATURAL, v=trap, Q=np.zeros((2, 2)))

    # D2: (K-2) x K second-difference rows, R: (K-2) x (K-2) overlap matrix
    d2 = np.zeros((K - 2, K))
    R = np.zeros((K - 2, K - 2))
    for j in range(1, K - 1):
        c = j - 1
        d2[c, j - 1] = 1.0 / h[j - 1]
        d2[c, j] = -1.0 / h[j - 1] - 1.0 / h[j]
        d2[c, j + 1] = 1.0 / h[j]
        R[c, c] = (h[j - 1] + h[j]) / 3.0
        if j < K - 2:
            R[c, c + 1] = R[c + 1, c] = h[j] / 6.0

    rinv_d2 = solve(R, d2, assume_a="pos")  # R^{-1} D2
    Q = d2.T @ rinv_d2
    Q = (Q + Q.T) / 2.0

    # trapezoid correction: -sum_j gamma_j (h_{j-1}^3 + h_j^3)/24 over
    # interior knots (boundary gammas vanish for natural splines)
    w = (h[:-1] ** 3 + h[1:] ** 3) / 24.0
    v = trap - rinv_d2.T @ w
    return SplineSystem(grid=grid, kind=NATURAL, v=v, Q=Q)


def periodic_spline_system(grid, period: float) -> SplineSystem:
    """Build (v, Q) exact for every ``period``-periodic cubic spline.

    Parameters
    ----------
    grid : array_like, shape (I,)
        Strictly increasing knots inside ``[0, period)``, I >= 3.  The wrap
        spacing ``period - grid[-1] + grid[0]`` is derived here, never
        supplied by the caller.
    period : float
        Length of the periodicity interval (24 for intra-day hours).

    Returns
    -------
    SplineSystem
        ``v @ g`` integrates the interpolating periodic spline over one full
        period; for a uniform grid ``v == (period / I) * ones``.  ``Q``
        annihilates constants.
    """
    grid = np.asarray(grid, dtype=float)
    _check_increasing(grid, 3, "periodic")
    if period <= 0:
        raise InvalidGridError("period must be positive")
    if grid[0] < 0 or grid[-1] >= period:
        raise InvalidGridError(f"periodic knots must lie in [0, {period})")
    I = grid.size

    h = np.empty(I)
    h[:-1] = np.diff(grid)
    h[-1] = period - grid[-1] + grid[0]
    hprev = np.roll(h, 1)

    # cyclic analogue of the natural construction: gamma has no boundary
    # zeros, so R and D2 are I x I with wrap-around couplings
    R = np.zeros((I, I))
    d2 = np.zeros((I, I))
    for i in range(I):
        ip = (i + 1) % I
        im = (i - 1) % I
        R[i, i] = (h[im] + h[i]) / 3.0
        R[i, ip] += h[i] / 6.0
        R[ip, i] += h[i] / 6.0
        d2[i, im] += 1.0 / h[im]
        d2[i, i] += -1.0 / h[im] - 1.0 / h[i]
        d2[i, ip] += 1.0 / h[i]

    rinv_d2 = solve(R, d2, assume_a="pos")
    Q = d2.T @ rinv_d2
    Q = (Q + Q.T) / 2.0

    trap = (hprev + h) / 2.0
    w = (hprev**3 + h**3) / 24.0
    v = trap - rinv_d2.T @ w
    return SplineSystem(grid=grid, kind=PERIODIC, v=v, Q=Q, period=float(period))


def _check_length(system: SplineSystem, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (system.size,):
        raise ValueError(f"expected sample vector of length {system.size}, got shape {g.shape}")
    return g


def integral(system: SplineSystem, g) -> float:
    """Integral of the interpolating spline of the class through (grid, g)."""
    g = _check_length(system, g)
    return float(system.v @ g)


def penalty(system: SplineSystem, g) -> float:
    """Integral of the squared second derivative, clamped at 0.

    ``g @ Q @ g`` is nonnegative in exact arithmetic; round-off can leave a
    value at a few ulp below zero, which is clamped.
    """
    g = _check_length(system, g)
    val = float(g @ system.Q @ g)
    return val if val > 0.0 else 0.0
