"""Fast HALS solver for the penalized weighted nonnegative factorization.

The problem: given weight and data tensors ``w, x`` of shape (I, K, M),

    minimize  |w o (x - sum_r a_r o b_r o c_r)|_F^2
              + alpha * sum_r a_r' Q1 a_r  +  beta * sum_r b_r' Q2 b_r
    over      A, B, C >= 0   with   v1'a_r = v2'b_r = 1 for every r,

where (v1, Q1) and (v2, Q2) come from the spline quadrature systems, so the
penalties are exact curvature integrals of the underlying smooth factors.

Each column subproblem is a penalized diagonal-plus-PSD least squares: with
``kv = c_r (x) b_r`` the normal equations in ``a_r`` read

    M_r a = (w^2 o x^(r))_(1) kv,   M_r = diag(w^2_(1) kv^2) + alpha Q1,

``x^(r)`` being the residual with component r added back.  The solve is
followed by clipping at zero and renormalization to unit integral, with the
scale folded into ``c_r`` so the modeled tensor is unchanged.  The clip +
rescale step is the standard HALS heuristic, not the exact KKT solution when
the nonnegativity constraint binds; a stall rule (two consecutive objective
increases) guards the rare non-monotone case.

The sweep updates all ``a_r``, then all ``b_r``, then all ``c_r`` (r
ascending) and maintains the full residual tensor incrementally: updating
column r touches the residual through the old-minus-new rank-one term only.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SolverNumericsError
from .splinequad import SplinePair
from .tensorops import compose, kron_vec, rank1, unfold, weighted_sq_norm

if TYPE_CHECKING:  # pragma: no cover
    from .panel import WeightedTensorPair

CONVERGED = "converged"
MAX_SWEEPS = "max_sweeps"
STALLED = "stalled"

_MAX_COLUMN_RESETS = 2


@dataclass
class SolverConfig:
    """Knobs of one fit.

    ``tol`` is the relative-improvement stopping threshold on the total
    objective; ``eps_div`` guards divisions and regularizes zero diagonal
    entries of otherwise singular column systems.
    """

    rank: int
    alpha: float = 0.0
    beta: float = 0.0
    tol: float = 1e-5
    max_sweeps: int = 500
    seed: int = 0
    eps_div: float = 1e-12

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("penalty weights must be >= 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.eps_div <= 0:
            raise ValueError("eps_div must be positive")


@dataclass
class FactorSet:
    """Nonnegative factor matrices A (I x R), B (K x R), C (M x R)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def rank(self) -> int:
        return self.A.shape[1]


@dataclass
class FitReport:
    """Objective trace and termination bookkeeping of one fit.

    The traces have ``sweeps + 1`` entries: the objective at initialization
    followed by one entry per completed sweep.  ``within_bin_variance`` is
    the data constant carried over from tensor assembly, so
    ``total_trace + within_bin_variance`` is the objective on the per-day
    functional scale.
    """

    loss_trace: np.ndarray
    penalty_trace: np.ndarray
    total_trace: np.ndarray
    sweeps: int
    termination: str
    within_bin_variance: float = 0.0
    column_resets: dict[int, int] = field(default_factory=dict)
    dead_columns: list[int] = field(default_factory=list)


def _svd_positive_factor(mat: np.ndarray, rank: int) -> np.ndarray:
    """Positive parts of the top left singular vectors, padded to ``rank``.

    Each singular vector is sign-flipped so its largest-magnitude entry is
    positive before clipping; vanished columns (zero singular value or zero
    positive part) are replaced by all-ones columns.
    """
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    available = int(np.sum(s > (s[0] * 1e-12 if s.size and s[0] > 0 else 0.0)))
    cols = []
    for r in range(min(rank, available)):
        col = u[:, r]
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        col = np.maximum(col, 0.0)
        if not col.any():
            col = np.ones(mat.shape[0])
        cols.append(col)
    while len(cols) < rank:
        cols.append(np.ones(mat.shape[0]))
    return np.column_stack(cols)


def init_svd_positive(x: np.ndarray, rank: int, v1: np.ndarray, v2: np.ndarray) -> FactorSet:
    """SVD-based nonnegative initialization of all three factors.

    A, B, C are the clipped top singular vectors of the three unfoldings of
    ``x``.  A and B columns are rescaled to unit quadrature integral
    (``v1 @ a_r = v2 @ b_r = 1``) with the compensating scale folded into the
    corresponding column of C.  A zero tensor yields uniform factors.
    """
    A = _svd_positive_factor(unfold(x, 1), rank)
    B = _svd_positive_factor(unfold(x, 2), rank)
    C = _svd_positive_factor(unfold(x, 3), rank)
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    for r in range(rank):
        sa = float(v1 @ A[:, r])
        if sa <= 0:
            A[:, r] = 1.0
            sa = float(v1.sum())
        A[:, r] /= sa
        sb = float(v2 @ B[:, r])
        if sb <= 0:
            B[:, r] = 1.0
            sb = float(v2.sum())
        B[:, r] /= sb
        C[:, r] *= sa * sb
    return FactorSet(A=A, B=B, C=C)


def _penalty_quadratic(mat: np.ndarray, q: np.ndarray) -> float:
    """Tr(mat' q mat), clamped at zero (q is PSD up to round-off)."""
    val = float(np.sum(mat * (q @ mat)))
    return val if val > 0.0 else 0.0


def objective(w: np.ndarray, x: np.ndarray, factors: FactorSet, q1: np.ndarray,
              q2: np.ndarray, alpha: float, beta: float) -> tuple[float, float, float]:
    """Weighted squared loss, curvature penalty and their sum."""
    loss = weighted_sq_norm(w, x - compose(factors.A, factors.B, factors.C))
    pen = alpha * _penalty_quadratic(factors.A, q1) + beta * _penalty_quadratic(factors.B, q2)
    return loss, pen, loss + pen


def _solve_column_system(diag: np.ndarray, q: np.ndarray, weight: float,
                         rhs: np.ndarray, eps_div: float) -> np.ndarray:
    """Solve ``(diag(d) + weight * q) a = rhs`` with zero diagonal entries
    regularized by ``eps_div`` (keeps the system positive definite when a
    row carries no observation weight)."""
    d = np.where(diag > 0.0, diag, eps_div)
    if weight == 0.0:
        return rhs / d
    m = weight * q + np.diag(d)
    return cho_solve(cho_factor(m, lower=True), rhs)


def _update_smooth_column(w_unf, xr_unf, kv, q, weight, v, eps_div):
    w2 = w_unf * w_unf
    diag = w2 @ (kv * kv)
    rhs = (w2 * xr_unf) @ kv
    raw = _solve_column_system(diag, q, weight, rhs, eps_div)
    clipped = np.maximum(raw, 0.0)
    scale = float(v @ clipped)
    if scale <= 0.0:
        return None, 0.0, raw
    return clipped / scale, scale, raw


def hals_update_a(w_unf1, xr_unf1, b, c, q1, alpha, v1, eps_div=1e-12):
    """Column update in mode 1: solve, clip, renormalize to ``v1 @ a = 1``.

    Parameters are the mode-1 unfoldings of the weight tensor and of the
    residual-plus-own-component tensor, the current ``b_r`` and ``c_r``
    columns, the penalty matrix and weight, and the quadrature vector.

    Returns ``(a_new, c_new, raw)``: the normalized column, the ``c_r``
    column with the normalization scale folded in, and the pre-clipping
    solution of the linear system.  ``a_new`` is None when the clipped
    solution vanished entirely (the caller decides the reset policy).
    """
    kv = kron_vec(c, b)
    a_new, scale, raw = _update_smooth_column(w_unf1, xr_unf1, kv, q1, alpha, v1, eps_div)
    if a_new is None:
        return None, c, raw
    return a_new, c * scale, raw


def hals_update_b(w_unf2, xr_unf2, a, c, q2, beta, v2, eps_div=1e-12):
    """Mode-2 analogue of :func:`hals_update_a` (thermal factor column)."""
    kv = kron_vec(c, a)
    b_new, scale, raw = _update_smooth_column(w_unf2, xr_unf2, kv, q2, beta, v2, eps_div)
    if b_new is None:
        return None, c, raw
    return b_new, c * scale, raw


def hals_update_c(w_unf3, xr_unf3, a, b):
    """Mode-3 column update: exact nonnegative diagonal solve.

    No penalty and no normalization apply to activations; rows with zero
    observation weight get activation zero.
    """
    kv = kron_vec(b, a)
    w2 = w_unf3 * w_unf3
    diag = w2 @ (kv * kv)
    rhs = (w2 * xr_unf3) @ kv
    with np.errstate(invalid="ignore", divide="ignore"):
        c_new = np.where(diag > 0.0, rhs / np.where(diag > 0.0, diag, 1.0), 0.0)
    return np.maximum(c_new, 0.0)


def _check_finite(factors: FactorSet, sweep: int) -> None:
    for name, mat in (("A", factors.A), ("B", factors.B), ("C", factors.C)):
        bad = np.nonzero(~np.all(np.isfinite(mat), axis=0))[0]
        if bad.size:
            raise SolverNumericsError(
                f"non-finite objective at sweep {sweep}: factor {name} column(s) {bad.tolist()}"
            )
    raise SolverNumericsError(f"non-finite objective at sweep {sweep}: cause outside factors")


def _fit_core(w, x, v1, q1, v2, q2, cfg: SolverConfig, within_bin_variance: float,
              sweep_callback) -> tuple[FactorSet, FitReport]:
    x = np.asfortranarray(np.asarray(x, float))
    w = np.asfortranarray(np.asarray(w, float))
    if w.shape != x.shape:
        raise ValueError(f"weight shape {w.shape} != data shape {x.shape}")
    R = cfg.rank

    factors = init_svd_positive(x, R, v1, v2)
    A, B, C = factors.A, factors.B, factors.C
    resid = x - compose(A, B, C)
    w_unf = {m: unfold(w, m) for m in (1, 2, 3)}

    def current_objective():
        loss = weighted_sq_norm(w, resid)
        pen = cfg.alpha * _penalty_quadratic(A, q1) + cfg.beta * _penalty_quadratic(B, q2)
        return loss, pen, loss + pen

    trace = [current_objective()]
    best_total = trace[0][2]
    best_factors = copy.deepcopy(factors)
    resets: dict[int, int] = {}
    frozen: set[int] = set()
    increases = 0
    termination = MAX_SWEEPS
    sweeps = 0

    uniform_a = np.ones(A.shape[0]) / float(np.sum(v1))
    uniform_b = np.ones(B.shape[0]) / float(np.sum(v2))

    def reset_or_freeze(r: int, factor: np.ndarray, uniform: np.ndarray) -> bool:
        """Apply the dead-column policy; returns True when the column was
        reset to uniform, False when it is now frozen at zero."""
        resets[r] = resets.get(r, 0) + 1
        if resets[r] > _MAX_COLUMN_RESETS:
            frozen.add(r)
            factor[:, r] = 0.0
            C[:, r] = 0.0
            return False
        factor[:, r] = uniform
        return True

    for sweep in range(cfg.max_sweeps):
        for r in range(R):
            if r in frozen:
                continue
            xr = resid + rank1(A[:, r], B[:, r], C[:, r])
            a_new, c_new, _ = hals_update_a(w_unf[1], unfold(xr, 1), B[:, r], C[:, r],
                                            q1, cfg.alpha, v1, cfg.eps_div)
            if a_new is None:
                if not reset_or_freeze(r, A, uniform_a):
                    resid = xr
                    continue
            else:
                A[:, r] = a_new
                C[:, r] = c_new
            resid = xr - rank1(A[:, r], B[:, r], C[:, r])

        for r in range(R):
            if r in frozen:
                continue
            xr = resid + rank1(A[:, r], B[:, r], C[:, r])
            b_new, c_new, _ = hals_update_b(w_unf[2], unfold(xr, 2), A[:, r], C[:, r],
                                            q2, cfg.beta, v2, cfg.eps_div)
            if b_new is None:
                if not reset_or_freeze(r, B, uniform_b):
                    resid = xr
                    continue
            else:
                B[:, r] = b_new
                C[:, r] = c_new
            resid = xr - rank1(A[:, r], B[:, r], C[:, r])

        for r in range(R):
            if r in frozen:
                continue
            xr = resid + rank1(A[:, r], B[:, r], C[:, r])
            C[:, r] = hals_update_c(w_unf[3], unfold(xr, 3), A[:, r], B[:, r])
            resid = xr - rank1(A[:, r], B[:, r], C[:, r])

        sweeps = sweep + 1
        loss, pen, total = current_objective()
        if not np.isfinite(total):
            _check_finite(factors, sweep)
        trace.append((loss, pen, total))
        if sweep_callback is not None:
            sweep_callback(sweep, factors)

        if total < best_total:
            best_total = total
            best_factors = copy.deepcopy(factors)

        prev = trace[-2][2]
        improvement = prev - total
        if improvement < 0:
            increases += 1
            if increases >= 2:
                termination = STALLED
                factors = best_factors
                break
        else:
            increases = 0
            if improvement / max(prev, cfg.eps_div) < cfg.tol:
                termination = CONVERGED
                break

    arr = np.array(trace)
    report = FitReport(
        loss_trace=arr[:, 0],
        penalty_trace=arr[:, 1],
        total_trace=arr[:, 2],
        sweeps=sweeps,
        termination=termination,
        within_bin_variance=within_bin_variance,
        column_resets=resets,
        dead_columns=sorted(frozen),
    )
    return factors, report


def fit(pair: "WeightedTensorPair", splines: SplinePair, cfg: SolverConfig,
        sweep_callback: Callable[[int, FactorSet], None] | None = None
        ) -> tuple[FactorSet, FitReport]:
    """Fit the smooth weighted factorization to an assembled tensor pair.

    ``sweep_callback(sweep_index, factors)``, when given, runs after every
    completed sweep on the live factor set (used for instrumentation and
    constraint monitoring in tests).
    """
    I, K, _ = pair.x.shape
    if splines.intraday.size != I:
        raise ValueError(f"intraday spline system has {splines.intraday.size} knots, tensor has I={I}")
    if splines.temperature.size != K:
        raise ValueError(f"temperature spline system has {splines.temperature.size} knots, tensor has K={K}")
    return _fit_core(pair.w, pair.x, splines.intraday.v, splines.intraday.Q,
                     splines.temperature.v, splines.temperature.Q, cfg,
                     pair.within_bin_variance, sweep_callback)


def fit_baseline_ntf(day_tensor: np.ndarray, cfg: SolverConfig,
                     mask: np.ndarray | None = None,
                     sweep_callback: Callable[[int, FactorSet], None] | None = None
                     ) -> tuple[FactorSet, FitReport]:
    """Plain NTF baseline over a (time, day, site) tensor.

    Same update machinery with unit weights, no curvature penalties, and
    sum-to-one column normalization of A and B in place of the quadrature
    integrals.  ``mask``, when given, is a (J, N) observed-day indicator
    turned into 0/1 weights (unit weights otherwise).
    """
    x = np.asarray(day_tensor, float)
    if x.ndim != 3:
        raise ValueError("day tensor must be 3-way (time, day, site)")
    I, J, N = x.shape
    if mask is None:
        w = np.ones_like(x)
    else:
        mask = np.asarray(mask, bool)
        if mask.shape != (J, N):
            raise ValueError(f"mask shape {mask.shape} != {(J, N)}")
        w = np.broadcast_to(mask.astype(float), (I, J, N)).copy()
        x = np.where(mask, x, 0.0)
    cfg = replace(cfg, alpha=0.0, beta=0.0)
    return _fit_core(w, x, np.ones(I), np.zeros((I, I)), np.ones(J), np.zeros((J, J)),
                     cfg, 0.0, sweep_callback)
