"""Dense 3-way tensor primitives used by the factorization updates.

Tensors are plain ``numpy`` arrays of shape ``(I, K, M)``.  The memory layout
of choice is Fortran order: mode-1 fibers ``t[:, k, m]`` are then contiguous
and the mode-1 unfolding is a zero-copy reshape (the update loop touches mode
1 most).  Unfoldings in modes 2 and 3 materialize copies.

Unfolding convention: mode-``n`` fibers become the columns of the unfolded
matrix, with the remaining indices ordered so that earlier modes vary
fastest.  For mode 1 the fiber ``(:, k, m)`` lands in column ``k + K * m``
(0-based); modes 2 and 3 are analogous with ``i`` varying fastest.  Under
this convention ``unfold(rank1(a, b, c), 1) == outer(a, kron_vec(c, b))``.
"""

from __future__ import annotations

import numpy as np

_MODE_AXES = {1: (0, 1, 2), 2: (1, 0, 2), 3: (2, 0, 1)}


def _check_tensor(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got ndim={t.ndim}")
    return t


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of a 3-way tensor (mode in {1, 2, 3})."""
    t = _check_tensor(t)
    try:
        axes = _MODE_AXES[mode]
    except KeyError:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}") from None
    lead = t.shape[mode - 1]
    return np.transpose(t, axes).reshape((lead, -1), order="F")


def refold(mat: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the (I, K, M) tensor."""
    if mode not in _MODE_AXES:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    i, k, m = dims
    mat = np.asarray(mat, dtype=float)
    shuffled = {1: (i, k, m), 2: (k, i, m), 3: (m, i, k)}[mode]
    t = mat.reshape(shuffled, order="F")
    inverse = {1: (0, 1, 2), 2: (1, 0, 2), 3: (1, 2, 0)}[mode]
    return np.asfortranarray(np.transpose(t, inverse))


def rank1(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Outer product tensor ``out[i, k, m] = a[i] * b[k] * c[m]``."""
    out = np.multiply.outer(np.asarray(a, float), np.outer(b, c))
    return np.asfortranarray(out)


def kron_vec(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two vectors: ``out[k + K*m] = c[m] * b[k]``."""
    return np.kron(np.asarray(c, float), np.asarray(b, float))


def khatri_rao(C: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product: column ``r`` is ``kron_vec(C[:, r], B[:, r])``."""
    C = np.asarray(C, float)
    B = np.asarray(B, float)
    if C.shape[1] != B.shape[1]:
        raise ValueError("factor matrices need the same number of columns")
    return (C[:, None, :] * B[None, :, :]).reshape(C.shape[0] * B.shape[0], C.shape[1])


def compose(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Sum of rank-one terms ``sum_r A[:, r] o B[:, r] o C[:, r]``."""
    dims = (A.shape[0], B.shape[0], C.shape[0])
    return refold(A @ khatri_rao(C, B).T, 1, dims)


def weighted_sq_norm(w: np.ndarray, resid: np.ndarray) -> float:
    """``sum((w * resid)**2)`` over all entries."""
    w = _check_tensor(w)
    resid = _check_tensor(resid)
    if w.shape != resid.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {resid.shape}")
    return float(np.sum((w * resid) ** 2))
