"""Two-value structured matrices and their multi-scale orthogonal prior.

A structured matrix has columns taking one of two values per level:
x[i, j] = a[j] if node i is assigned to side1 at level j, else b[j].
The prior draws a, b standard normal, assignment rates p uniform, the
binary assignment matrix Bernoulli(p) columnwise, and rejects draws
whose structured matrix is column-rank-deficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .whitening import cholesky, rank_ok


class PriorRejectionError(RuntimeError):
    """Rank-rejection sampling exhausted its attempt budget."""


@dataclass(frozen=True)
class ColumnValues:
    """Per-level value pair (a[j], b[j]) for the two sides."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError(f"a and b must be 1-d of equal length, got {a.shape} vs {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def depth(self):
        return self.a.size


@dataclass(frozen=True)
class MixtureProbs:
    """Per-level side1 assignment probabilities, strictly inside (0, 1)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError(f"p must be 1-d, got shape {p.shape}")
        if not np.all((p > 0.0) & (p < 1.0)):
            raise ValueError("assignment probabilities must lie strictly in (0, 1)")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class StructuredMatrix:
    """Assignment weights (binary or relaxed in [0, 1]) plus column values."""

    w: np.ndarray
    values: ColumnValues

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != self.values.depth:
            raise ValueError(
                f"w must be n x {self.values.depth}, got shape {w.shape}"
            )
        object.__setattr__(self, "w", w)


def build_x(sm):
    """Assemble the n x k matrix: w * a + (1 - w) * b columnwise."""
    return sm.w * sm.values.a + (1.0 - sm.w) * sm.values.b


def sample_prior(n, k, rng, max_attempts=1000):
    """Draw (values, probs, structured matrix) with rank rejection.

    a, b, p are drawn once; the assignment matrix alone is resampled
    until the structured matrix has full column rank.  Exhausting
    max_attempts raises PriorRejectionError, which in practice signals
    rates pinned near 0 or 1 (near-constant columns).
    """
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    values = ColumnValues(a=rng.standard_normal(k), b=rng.standard_normal(k))
    probs = MixtureProbs(p=rng.uniform(size=k))
    for _ in range(max_attempts):
        w = (rng.random((n, k)) < probs.p).astype(np.float64)
        sm = StructuredMatrix(w=w, values=values)
        if rank_ok(build_x(sm)):
            return values, probs, sm
    raise PriorRejectionError(
        f"no full-rank assignment in {max_attempts} attempts (n={n}, k={k})"
    )


def log_bernoulli_mass(w, probs):
    """Columnwise Bernoulli log-mass of assignment weights.

    Accepts binary or relaxed weights; relaxed weights are plugged in
    as-is (no density correction for the relaxation).
    """
    w = np.asarray(w, dtype=np.float64)
    p = probs.p
    if w.ndim != 2 or w.shape[1] != p.size:
        raise ValueError(f"w must be n x {p.size}, got shape {w.shape}")
    if np.any((w < 0.0) | (w > 1.0)):
        raise ValueError("assignment weights must lie in [0, 1]")
    return float(np.sum(w * np.log(p) + (1.0 - w) * np.log1p(-p)))


def log_gaussian_ab(values):
    """Standard normal log-kernel of the column values, -sum(a^2 + b^2)/2."""
    return float(-0.5 * (values.a @ values.a + values.b @ values.b))


def log_det_gram(x):
    """((n - k - 1)/2) * log det(X'X), via the Cholesky diagonal.

    This is the Jacobian weight relating the structured-matrix density
    to the induced density of its whitened frame; it vanishes at
    n = k + 1.  Rank deficiency propagates as NotPositiveDefiniteError.
    """
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    low = cholesky(x.T @ x)
    return float((n - k - 1) * np.sum(np.log(low.diagonal())))
