"""Cholesky whitening of structured matrices onto the Stiefel manifold.

whiten() maps a full-column-rank n x k matrix X to Q = X L^-T with
L the lower Cholesky factor of X'X, via triangular solves.  Because
L^-T is upper triangular, column j of Q mixes only columns 1..j of X,
so a matrix whose first j columns are constant on a cell keeps that
cell structure in Q.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

PIVOT_EPS = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Cholesky pivot at or below the relative floor; doubles as the rank test."""

    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(
            message or f"pivot {pivot_index} not positive definite"
        )


def cholesky(s, eps=PIVOT_EPS):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    A pivot <= eps * max(diag(s)) raises NotPositiveDefiniteError
    carrying the failing pivot index.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    scale = max(np.abs(s).max(), 1.0)
    if np.abs(s - s.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    k = s.shape[0]
    floor = eps * max(s.diagonal().max(), 0.0)
    low = np.zeros((k, k))
    for j in range(k):
        pivot = s[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > floor:
            raise NotPositiveDefiniteError(j)
        low[j, j] = np.sqrt(pivot)
        if j + 1 < k:
            low[j + 1:, j] = (s[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def _whiten_pass(x):
    low = cholesky(x.T @ x)
    q = solve_triangular(low, x.T, lower=True).T
    return q, low


def whiten(x):
    """Orthonormalize the columns of x by Cholesky whitening.

    Two passes: the second whitens the first-pass frame again, taking
    orthonormality error from eps * cond(X)^2 down to ~eps.  The
    composite is still X (L2 L1)^-T with L2 L1 lower triangular, so
    the triangular column structure is preserved exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {x.shape}")
    n, k = x.shape
    if n < k:
        raise ValueError(f"need n >= k, got {n} x {k}")
    q, _ = _whiten_pass(x)
    q, _ = _whiten_pass(q)
    return q


def rank_ok(x):
    """True iff x has full column rank under the whitening pivot rule."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        return False
    try:
        cholesky(x.T @ x)
    except NotPositiveDefiniteError:
        return False
    return True


def extract_column_partition(column, tol=1e-8):
    """Group a column's entries into clusters of near-equal values.

    Single-linkage on the sorted values with gap threshold tol; labels
    are integers numbered by first occurrence along the column.
    """
    v = np.asarray(column, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("empty column")
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    boundary = np.diff(sorted_v) > tol
    group_sorted = np.concatenate(([0], np.cumsum(boundary)))
    groups = np.empty(v.size, dtype=np.int64)
    groups[order] = group_sorted
    # relabel so the first node of each cluster fixes its id
    labels = np.full(v.size, -1, dtype=np.int64)
    remap = {}
    for i, g in enumerate(groups):
        if g not in remap:
            remap[g] = len(remap)
        labels[i] = remap[g]
    return labels


def whiten_with_factors(x):
    """Both whitening passes with their factors, for gradient work.

    Returns (q, passes) where passes = [(q1, low1), (q2, low2)] and
    q = q2 is the refined frame.
    """
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    if n < k:
        raise ValueError(f"need n >= k, got {n} x {k}")
    q1, low1 = _whiten_pass(x)
    q2, low2 = _whiten_pass(q1)
    return q2, [(q1, low1), (q2, low2)]


def _half_lower(h):
    out = np.tril(h)
    np.fill_diagonal(out, 0.5 * h.diagonal())
    return out


def whiten_backward(passes, grad_q):
    """Pull a gradient w.r.t. the whitened frame back to the input matrix.

    For one pass Q = X L^-T, the adjoint is
        X_bar = (G - Q (phi(G'Q) + phi(G'Q)')) L^-1
    with phi the lower-triangle mask at half diagonal; applied once per
    whitening pass, innermost last.
    """
    g = grad_q
    for q, low in reversed(passes):
        h = _half_lower(g.T @ q)
        g = solve_triangular(low.T, (g - q @ (h + h.T)).T, lower=False).T
    return g
