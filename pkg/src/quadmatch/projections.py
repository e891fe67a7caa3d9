"""Projections onto the doubly-stochastic set and onto permutation matrices.

These are the two feasibility projections used by the matching solver:
Sinkhorn normalization during training (differentiable) and the Hungarian
assignment at inference (discrete).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import autodiff as ad
from .errors import InvalidInputError

SINKHORN_MAX_ITER = 50
SINKHORN_TOL = 1e-6


@dataclass
class SinkhornResult:
    matrix: object  # ndarray, or autodiff.Var on the training tape
    converged: bool
    iterations: int


def sinkhorn(m, max_iter: int = SINKHORN_MAX_ITER, tol: float = SINKHORN_TOL, *,
             log_input: bool = False) -> SinkhornResult:
    """Alternating row/column normalization toward a doubly-stochastic matrix.

    Entries must be strictly positive (callers feed exponentiated scores).
    Accumulation runs in the log domain so badly scaled inputs cannot
    overflow; with ``log_input`` the argument is taken to be the log matrix
    already, which lets affinities too spread out to exponentiate pass
    through without underflowing to zero. Iteration stops once every row and
    column sum is within ``tol`` of 1, or after ``max_iter`` rounds, in which
    case the best iterate is returned with ``converged`` False. ``tol <= 0``
    disables the check and unrolls exactly ``max_iter`` rounds, which keeps
    the map smooth for differentiation.
    """
    mv = ad.value(m)
    if mv.ndim != 2 or mv.shape[0] != mv.shape[1] or mv.shape[0] < 1:
        raise InvalidInputError(f"sinkhorn expects a square matrix, got shape {mv.shape}")
    if not np.all(np.isfinite(mv)):
        raise InvalidInputError("sinkhorn requires finite entries")
    if not log_input and np.any(mv <= 0.0):
        raise InvalidInputError("sinkhorn requires strictly positive entries")

    log_x = m if log_input else ad.log(m)
    converged = tol <= 0.0
    iterations = 0
    for i in range(max_iter):
        log_x = log_x - ad.logsumexp(log_x, axis=1, keepdims=True)
        log_x = log_x - ad.logsumexp(log_x, axis=0, keepdims=True)
        iterations = i + 1
        if tol > 0.0:
            lv = ad.value(log_x)
            row_dev = np.abs(np.exp(_lse(lv, axis=1)) - 1.0).max()
            col_dev = np.abs(np.exp(_lse(lv, axis=0)) - 1.0).max()
            if max(row_dev, col_dev) < tol:
                converged = True
                break
    return SinkhornResult(ad.exp(log_x), converged, iterations)


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)), axis=axis)


def hungarian(score) -> np.ndarray:
    """Permutation matrix maximizing ``sum(score * X)``.

    Ties between optimal assignments are broken toward the lexicographically
    smallest permutation (row 0's column first, then row 1's, ...), which is
    realized by fixing rows in order to the smallest column that still admits
    an optimal completion. Not differentiable: rejects tape variables.
    """
    if isinstance(score, ad.Var):
        raise InvalidInputError("hungarian is not differentiable; pass a plain array")
    s = np.asarray(score, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise InvalidInputError(f"hungarian expects a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("hungarian requires finite entries")

    n = s.shape[0]
    best_value = _lap_value(s)
    tol = 1e-9 * max(1.0, float(np.abs(s).max()) * n)

    perm = np.zeros((n, n), dtype=float)
    cols = list(range(n))
    prefix = 0.0
    for i in range(n):
        for pos, j in enumerate(cols):
            rest_rows = s[i + 1:][:, [c for c in cols if c != j]]
            rest = _lap_value(rest_rows) if rest_rows.size else 0.0
            if prefix + s[i, j] + rest >= best_value - tol:
                perm[i, j] = 1.0
                prefix += s[i, j]
                del cols[pos]
                break
        else:  # numeric safety net; the optimal column always qualifies
            raise InvalidInputError("hungarian failed to certify an optimal completion")
    return perm


def _lap_value(s: np.ndarray) -> float:
    if s.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(s, maximize=True)
    return float(s[rows, cols].sum())
