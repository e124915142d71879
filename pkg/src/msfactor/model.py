"""Logistic latent-factor model for a population of binary networks.

Each subject's n x n symmetric adjacency matrix has independent upper
triangle entries A[s, i, j] ~ Bernoulli(sigmoid(psi[s, i, j])) with
log-odds psi_s = Q diag(d_s) Q' + z_s built from a shared orthonormal
frame Q, per-subject nonnegative loadings d_s, and a scalar offset z_s.
Diagonals are excluded throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln

LOADING_SHAPE = 0.1   # inverse-gamma shape for each loading
LOADING_RATE = 0.1    # inverse-gamma rate
OFFSET_SD = 10.0      # normal prior sd for each offset


@dataclass(frozen=True)
class NetworkDataset:
    """S binary undirected networks on a common node set."""

    n: int
    adjacency: np.ndarray  # S x n x n, arrays of 0/1

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 3 or a.shape[1] != self.n or a.shape[2] != self.n:
            raise ValueError(f"adjacency must be S x {self.n} x {self.n}, got {a.shape}")
        object.__setattr__(self, "adjacency", a.astype(np.float64))

    @property
    def n_subjects(self):
        return self.adjacency.shape[0]

    def validate(self):
        """Reject non-binary entries, asymmetry, or nonzero diagonals."""
        a = self.adjacency
        bad = np.flatnonzero(~np.isin(a, (0.0, 1.0)))
        if bad.size:
            s, i, j = np.unravel_index(bad[0], a.shape)
            raise ValueError(f"non-binary entry at subject {s}, ({i}, {j})")
        mismatch = np.flatnonzero(a != np.swapaxes(a, 1, 2))
        if mismatch.size:
            s, i, j = np.unravel_index(mismatch[0], a.shape)
            raise ValueError(f"asymmetric entry at subject {s}, ({i}, {j})")
        diag = np.flatnonzero(np.diagonal(a, axis1=1, axis2=2))
        if diag.size:
            s, i = np.unravel_index(diag[0], (a.shape[0], self.n))
            raise ValueError(f"nonzero diagonal at subject {s}, node {i}")

    def edge_density(self):
        pairs = self.n * (self.n - 1) / 2
        upper = np.triu_indices(self.n, k=1)
        return float(self.adjacency[:, upper[0], upper[1]].mean()) if pairs else 0.0

    def to_json(self):
        return json.dumps({
            "n": self.n,
            "subjects": self.adjacency.astype(int).tolist(),
        })

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        data = cls(n=payload["n"], adjacency=np.asarray(payload["subjects"], dtype=np.float64))
        data.validate()
        return data


@dataclass(frozen=True)
class SubjectParams:
    """Per-subject log-loadings (S x k) and offsets (S,)."""

    log_loadings: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        ld = np.asarray(self.log_loadings, dtype=np.float64)
        z = np.asarray(self.offsets, dtype=np.float64)
        if ld.ndim != 2 or z.ndim != 1 or ld.shape[0] != z.size:
            raise ValueError(
                f"log_loadings must be S x k with matching offsets, got {ld.shape} and {z.shape}"
            )
        object.__setattr__(self, "log_loadings", ld)
        object.__setattr__(self, "offsets", z)

    @property
    def n_subjects(self):
        return self.offsets.size

    @property
    def depth(self):
        return self.log_loadings.shape[1]


def _log_odds(q, sp):
    d = np.exp(sp.log_loadings)
    psi = np.einsum("ik,sk,jk->sij", q, d, q, optimize=True)
    return psi + sp.offsets[:, None, None]


def _log1p_exp(t):
    # stable log(1 + exp(t)) = max(t, 0) + log1p(exp(-|t|))
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def log_likelihood(data, q, sp):
    """Bernoulli log-likelihood over all subjects' upper triangles."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape[0] != data.n:
        raise ValueError(f"frame has {q.shape[0]} rows, data has {data.n} nodes")
    if sp.n_subjects != data.n_subjects or sp.depth != q.shape[1]:
        raise ValueError("subject parameters do not match data/frame dimensions")
    psi = _log_odds(q, sp)
    iu = np.triu_indices(data.n, k=1)
    psi_u = psi[:, iu[0], iu[1]]
    a_u = data.adjacency[:, iu[0], iu[1]]
    return float(np.sum(a_u * psi_u - _log1p_exp(psi_u)))


def log_prior_theta(sp):
    """Log prior of the subject parameters.

    Loadings are inverse-gamma(0.1, 0.1), expressed on the log scale
    (the log d Jacobian is included); offsets carry a normal(0, 10^2)
    kernel without its constant.
    """
    ld = sp.log_loadings
    d = np.exp(ld)
    shape, rate = LOADING_SHAPE, LOADING_RATE
    per = shape * np.log(rate) - gammaln(shape) - shape * ld - rate / d
    kern = -0.5 * (sp.offsets / OFFSET_SD) @ (sp.offsets / OFFSET_SD)
    return float(per.sum() + kern)


def log_likelihood_grads(data, q, sp):
    """Gradients of log_likelihood w.r.t. (q, log_loadings, offsets).

    Works through the symmetric zero-diagonal residual R_s with
    entries A[s,i,j] - sigmoid(psi[s,i,j]):
      d/dq[i, m]          = sum_s d[s, m] * (R_s q[:, m])[i]
      d/dlog_loadings[s,m]= d[s, m] * q[:, m]' R_s q[:, m] / 2
      d/doffsets[s]       = sum of R_s above the diagonal
    """
    q = np.asarray(q, dtype=np.float64)
    psi = _log_odds(q, sp)
    resid = data.adjacency - expit(psi)
    idx = np.arange(data.n)
    resid[:, idx, idx] = 0.0
    d = np.exp(sp.log_loadings)
    g_q = np.einsum("sij,jm,sm->im", resid, q, d, optimize=True)
    quad = np.einsum("im,sij,jm->sm", q, resid, q, optimize=True)
    g_ld = 0.5 * d * quad
    iu = np.triu_indices(data.n, k=1)
    g_z = resid[:, iu[0], iu[1]].sum(axis=1)
    return g_q, g_ld, g_z


def simulate_dataset(rp, values, probs, sp, rng):
    """Generate networks whose shared frame whitens a partition-structured matrix.

    Returns (dataset, truth) where truth records the frame, partition,
    values, probs, and subject parameters that produced the data.
    """
    from .prior import StructuredMatrix, build_x
    from .whitening import whiten

    w = rp.membership_matrix().astype(np.float64)
    x = build_x(StructuredMatrix(w=w, values=values))
    q = whiten(x)
    psi = _log_odds(q, sp)
    prob = expit(psi)
    upper = rng.random(prob.shape) < prob
    adj = np.triu(upper, k=1)
    adj = adj + np.swapaxes(adj, 1, 2)
    data = NetworkDataset(n=rp.n, adjacency=adj.astype(np.float64))
    truth = {
        "frame": q,
        "partition": rp,
        "values": values,
        "probs": probs,
        "subject_params": sp,
        "membership": w,
    }
    return data, truth
