"""Posterior sampling for the multi-scale network factor model.

The chain alternates two moves:
  (i)  HMC on the continuous block (log-loadings, offsets, assignment
       logits), with binary assignments relaxed through a tempered
       sigmoid so the potential is differentiable;
  (ii) an exchange move on (a, b, p) that sidesteps the intractable
       normalizing constant of the rank-constrained assignment prior
       by rejection-sampling an auxiliary assignment pattern.

The shared potential is
  U = -log_likelihood - log_prior_theta - log_bernoulli_mass
      - log_det_gram + sum(a^2 + b^2)/2,
and a Cholesky failure anywhere (the rank test) invalidates the
proposal that produced it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, logit

from .model import (
    LOADING_RATE,
    LOADING_SHAPE,
    OFFSET_SD,
    SubjectParams,
    log_likelihood,
    log_likelihood_grads,
    log_prior_theta,
)
from .partition import random_partition
from .prior import (
    ColumnValues,
    MixtureProbs,
    StructuredMatrix,
    build_x,
    log_bernoulli_mass,
    log_gaussian_ab,
)
from .whitening import (
    NotPositiveDefiniteError,
    rank_ok,
    whiten_backward,
    whiten_with_factors,
)

PROB_FLOOR = 1e-12  # keeps exchanged rates strictly inside (0, 1)


class InitializationError(RuntimeError):
    """No valid starting state could be constructed."""


class _DivergenceError(FloatingPointError):
    """Non-finite value inside a trajectory; the proposal is rejected."""


@dataclass(frozen=True)
class ChainState:
    """Full sampler state; assignments live as logits at temperature tau."""

    logits: np.ndarray          # n x k
    values: ColumnValues
    probs: MixtureProbs
    subject_params: SubjectParams
    tau: float

    def __post_init__(self):
        lg = np.asarray(self.logits, dtype=np.float64)
        k = self.values.depth
        if lg.ndim != 2 or lg.shape[1] != k:
            raise ValueError(f"logits must be n x {k}, got shape {lg.shape}")
        if self.probs.p.size != k or self.subject_params.depth != k:
            raise ValueError("values, probs, and subject parameters disagree on depth")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "logits", lg)

    @property
    def n_nodes(self):
        return self.logits.shape[0]

    @property
    def depth(self):
        return self.logits.shape[1]

    def relaxed_weights(self):
        return expit(self.logits / self.tau)

    def hard_weights(self):
        return (self.relaxed_weights() > 0.5).astype(np.float64)


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 0.05
    leapfrog_steps: int = 10
    target_accept: float = 0.7
    warmup: int = 1000
    mass: np.ndarray | None = None  # diagonal, per coordinate of (log_d, z, logits)

    def __post_init__(self):
        if not self.step_size > 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.leapfrog_steps < 1:
            raise ValueError(f"leapfrog_steps must be >= 1, got {self.leapfrog_steps}")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError(f"target_accept must be in (0, 1), got {self.target_accept}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if self.mass is not None:
            m = np.asarray(self.mass, dtype=np.float64)
            if m.ndim != 1 or np.any(m <= 0.0):
                raise ValueError("mass must be a positive 1-d diagonal")
            object.__setattr__(self, "mass", m)


@dataclass(frozen=True)
class ExchangeConfig:
    window: float = 0.25            # uniform half-width for the a, b proposals
    max_rejection_attempts: int = 100
    target_accept: float = 0.35

    def __post_init__(self):
        # zero freezes a, b (identity proposal), still a valid kernel on p
        if self.window < 0.0:
            raise ValueError(f"window must be >= 0, got {self.window}")
        if self.max_rejection_attempts < 1:
            raise ValueError(
                f"max_rejection_attempts must be >= 1, got {self.max_rejection_attempts}"
            )
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError(f"target_accept must be in (0, 1), got {self.target_accept}")


def _relaxed_x(state):
    w = state.relaxed_weights()
    return w, build_x(StructuredMatrix(w=w, values=state.values))


def potential(state, data):
    """Joint potential U; raises NotPositiveDefiniteError on rank failure.

    data may be None, dropping the likelihood term (prior-only chain).
    """
    w, x = _relaxed_x(state)
    n, k = x.shape
    q, passes = whiten_with_factors(x)
    ll = 0.0 if data is None else log_likelihood(data, q, state.subject_params)
    lp = log_prior_theta(state.subject_params)
    lg = log_bernoulli_mass(w, state.probs)
    gram = (n - k - 1) * float(np.sum(np.log(passes[0][1].diagonal())))
    lab = log_gaussian_ab(state.values)
    return -(ll + lp + lg + gram + lab)


def potential_grad(state, data):
    """Gradient of U over (log_loadings, offsets, logits)."""
    w, x = _relaxed_x(state)
    n, k = x.shape
    q, passes = whiten_with_factors(x)
    sp = state.subject_params
    d = np.exp(sp.log_loadings)
    if data is None:
        gx_like = np.zeros_like(x)
        g_ld = np.zeros_like(sp.log_loadings)
        g_z = np.zeros_like(sp.offsets)
    else:
        g_q, g_ld, g_z = log_likelihood_grads(data, q, sp)
        if not np.isfinite(g_q).all():
            raise _DivergenceError("non-finite frame gradient")
        gx_like = whiten_backward(passes, g_q)
    # d(log det X'X)/dX = 2 X (X'X)^-1 = 2 Q1 L1^-1
    q1, low1 = passes[0]
    gx_gram = (n - k - 1) * solve_triangular(low1.T, q1.T, lower=False).T
    gu_x = -(gx_like + gx_gram)
    sig_slope = w * (1.0 - w) / state.tau
    grad_logits = (gu_x * (state.values.a - state.values.b) - logit(state.probs.p)) * sig_slope
    grad_ld = -g_ld + LOADING_SHAPE - LOADING_RATE / d
    grad_z = -g_z + sp.offsets / OFFSET_SD**2
    return grad_ld, grad_z, grad_logits


def _pack(sp, logits):
    return np.concatenate([sp.log_loadings.ravel(), sp.offsets, logits.ravel()])


def _unpack(vec, state):
    sp = state.subject_params
    s, k = sp.log_loadings.shape
    n = state.n_nodes
    ld = vec[: s * k].reshape(s, k)
    z = vec[s * k: s * k + s]
    lg = vec[s * k + s:].reshape(n, k)
    return dataclasses.replace(
        state,
        logits=lg,
        subject_params=SubjectParams(log_loadings=ld, offsets=z),
    )


def _flat_grad(state, data):
    g_ld, g_z, g_lg = potential_grad(state, data)
    return np.concatenate([g_ld.ravel(), g_z, g_lg.ravel()])


def leapfrog(position, velocity, grad_fn, step, n_steps, omega):
    """Stoermer-Verlet integration of ds/dt = omega*v, dv/dt = -grad U(s).

    omega is the diagonal of the kinetic form v' Omega v / 2 (velocity
    covariance Omega^-1).  Exceptions from grad_fn propagate so the
    caller can reject the whole trajectory.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    vel = velocity - 0.5 * step * grad_fn(position)
    pos = position + step * omega * vel
    for _ in range(n_steps - 1):
        vel = vel - step * grad_fn(pos)
        pos = pos + step * omega * vel
    vel = vel - 0.5 * step * grad_fn(pos)
    return pos, vel


def _hmc_step(state, data, rng, step, n_steps, omega, u_cur=None):
    if u_cur is None:
        u_cur = potential(state, data)
    pos = _pack(state.subject_params, state.logits)
    vel = rng.standard_normal(pos.size) / np.sqrt(omega)
    kin0 = 0.5 * vel @ (omega * vel)

    def grad_fn(v):
        if not np.isfinite(v).all():
            raise _DivergenceError("non-finite position")
        g = _flat_grad(_unpack(v, state), data)
        if not np.isfinite(g).all():
            raise _DivergenceError("non-finite gradient")
        return g

    # overflow inside a divergent trajectory is expected; the proposal
    # is rejected rather than letting inf/nan escape
    try:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            pos1, vel1 = leapfrog(pos, vel, grad_fn, step, n_steps, omega)
            prop = _unpack(pos1, state)
            u_prop = potential(prop, data)
            kin1 = 0.5 * vel1 @ (omega * vel1)
    except (NotPositiveDefiniteError, _DivergenceError):
        return state, False, 0.0, u_cur
    log_alpha = (u_cur - u_prop) + (kin0 - kin1)
    if not np.isfinite(log_alpha):
        return state, False, 0.0, u_cur
    alpha = float(np.exp(min(0.0, log_alpha)))
    if rng.random() < alpha:
        return prop, True, alpha, u_prop
    return state, False, alpha, u_cur


def hmc_update(state, data, cfg, rng):
    """One HMC transition at the configured step size and mass."""
    m = _pack(state.subject_params, state.logits).size
    omega = np.ones(m) if cfg.mass is None else cfg.mass
    if omega.size != m:
        raise ValueError(f"mass has {omega.size} entries, state has {m} coordinates")
    new, accepted, _, _ = _hmc_step(
        state, data, rng, cfg.step_size, cfg.leapfrog_steps, omega
    )
    return new, accepted


def _exchange_step(state, data, cfg, rng, window, u_cur=None):
    """Returns (state, accepted, aux_exhausted, u_of_returned_state)."""
    n, k = state.logits.shape
    hard = state.hard_weights()
    counts = hard.sum(axis=0)
    p = state.probs.p
    p_star = np.clip(
        rng.beta(1.0 + counts, 1.0 + n - counts), PROB_FLOOR, 1.0 - PROB_FLOOR
    )
    a, b = state.values.a, state.values.b
    a_star = a + rng.uniform(-window, window, size=k)
    b_star = b + rng.uniform(-window, window, size=k)
    values_star = ColumnValues(a=a_star, b=b_star)

    aux = None
    for _ in range(cfg.max_rejection_attempts):
        y = (rng.random((n, k)) < p_star).astype(np.float64)
        if rank_ok(build_x(StructuredMatrix(w=y, values=values_star))):
            aux = y
            break
    if aux is None:
        return state, False, True, u_cur

    # the reverse move draws the same pattern under the current values,
    # so it must be full rank there too
    if not rank_ok(build_x(StructuredMatrix(w=aux, values=state.values))):
        return state, False, False, u_cur

    if u_cur is None:
        u_cur = potential(state, data)
    proposal = dataclasses.replace(
        state, values=values_star, probs=MixtureProbs(p=p_star)
    )
    try:
        u_star = potential(proposal, data)
    except NotPositiveDefiniteError:
        return state, False, False, u_cur

    # log of g(W; p)/g(W; p*) x g(Y; p)/g(Y; p*); the first factor is
    # simultaneously the Beta proposal-density correction (the Beta
    # normalizers cancel because the counts are fixed during the move)
    aux_counts = aux.sum(axis=0)
    dlp = np.log(p) - np.log(p_star)
    dlq = np.log1p(-p) - np.log1p(-p_star)
    log_ratio = (u_cur - u_star)
    log_ratio += float(counts @ dlp + (n - counts) @ dlq)
    log_ratio += float(aux_counts @ dlp + (n - aux_counts) @ dlq)
    if not np.isfinite(log_ratio):
        return state, False, False, u_cur
    if rng.random() < np.exp(min(0.0, log_ratio)):
        return proposal, True, False, u_star
    return state, False, False, u_cur


def exchange_update(state, data, cfg, rng):
    """One exchange transition on (a, b, p) at the configured window."""
    window = np.full(state.depth, cfg.window)
    new, accepted, _, _ = _exchange_step(state, data, cfg, rng, window)
    return new, accepted


def canonicalize(state):
    """Resolve label switching: order each level's values as a_j > b_j.

    Swapping (a_j, b_j) while complementing the level's assignments and
    rate leaves the structured matrix, and hence the frame, unchanged.
    """
    swap = state.values.a < state.values.b
    if not swap.any():
        return state
    a = np.where(swap, state.values.b, state.values.a)
    b = np.where(swap, state.values.a, state.values.b)
    logits = np.where(swap, -state.logits, state.logits)
    p = np.where(swap, 1.0 - state.probs.p, state.probs.p)
    return dataclasses.replace(
        state,
        logits=logits,
        values=ColumnValues(a=a, b=b),
        probs=MixtureProbs(p=p),
    )


def initial_state(data, k, tau, rng, n=None, n_subjects=None, max_attempts=1000):
    """Default start: a random valid partition pattern with unit values.

    Logits are set mildly inside the relaxation (weights 0.05/0.95), so
    the first trajectories can still flip assignments; offsets start at
    the logit of the observed edge density.
    """
    if data is not None:
        n = data.n
        n_subjects = data.n_subjects
        density = float(np.clip(data.edge_density(), 1e-3, 1.0 - 1e-3))
        z0 = float(logit(density))
    else:
        if n is None or n_subjects is None:
            raise InitializationError("without data, n and n_subjects are required")
        z0 = 0.0
    values = ColumnValues(a=np.ones(k), b=-np.ones(k))
    w = None
    for _ in range(max_attempts):
        cand = random_partition(n, k, rng).membership_matrix().astype(np.float64)
        if rank_ok(build_x(StructuredMatrix(w=cand, values=values))):
            w = cand
            break
    if w is None:
        raise InitializationError(
            f"no full-rank starting pattern in {max_attempts} attempts (n={n}, k={k})"
        )
    relaxed = 0.05 + 0.9 * w
    logits = tau * logit(relaxed)
    sp = SubjectParams(
        log_loadings=np.zeros((n_subjects, k)), offsets=np.full(n_subjects, z0)
    )
    return ChainState(
        logits=logits,
        values=values,
        probs=MixtureProbs(p=np.full(k, 0.5)),
        subject_params=sp,
        tau=tau,
    )


@dataclass
class SampleLog:
    """Thinned post-warmup draws plus adaptation metadata.

    Draws are stored raw, exactly as the chain visited them; label
    resolution is a summary-time concern (see diagnostics.summarize).
    w_relaxed is kept only in memory; the CSV round trip carries the
    hard patterns, which is what the summaries consume.
    """

    iterations: np.ndarray
    u: np.ndarray
    hmc_accept: np.ndarray
    exch_accept: np.ndarray
    exch_skipped: np.ndarray
    step_sizes: np.ndarray
    a: np.ndarray               # T x k
    b: np.ndarray
    p: np.ndarray
    offsets: np.ndarray         # T x S
    log_loadings: np.ndarray    # T x S x k
    w_hard: np.ndarray          # T x n x k
    w_relaxed: np.ndarray | None
    meta: dict = field(default_factory=dict)
    init_state: ChainState | None = None

    @property
    def n_draws(self):
        return self.iterations.size

    def to_csv(self, trace_path, w_trace_path, nodes=None):
        k = self.a.shape[1]
        s = self.offsets.shape[1]
        cols = ["iteration", "U", "hmc_accept", "exch_accept", "h"]
        cols += [f"a_{j + 1}" for j in range(k)]
        cols += [f"b_{j + 1}" for j in range(k)]
        cols += [f"p_{j + 1}" for j in range(k)]
        cols += [f"z_{i + 1}" for i in range(s)]
        cols += [f"logd_{i + 1}_{j + 1}" for i in range(s) for j in range(k)]
        with open(trace_path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for t in range(self.n_draws):
                row = [
                    str(int(self.iterations[t])),
                    format(self.u[t], ".17g"),
                    str(int(self.hmc_accept[t])),
                    str(int(self.exch_accept[t])),
                    format(self.step_sizes[t], ".17g"),
                ]
                row += [format(v, ".17g") for v in self.a[t]]
                row += [format(v, ".17g") for v in self.b[t]]
                row += [format(v, ".17g") for v in self.p[t]]
                row += [format(v, ".17g") for v in self.offsets[t]]
                row += [format(v, ".17g") for v in self.log_loadings[t].ravel()]
                fh.write(",".join(row) + "\n")
        n = self.w_hard.shape[1]
        sel = list(range(n)) if nodes is None else list(nodes)
        wcols = ["iteration"] + [
            f"w_{i}_{j + 1}" for i in sel for j in range(k)
        ]
        with open(w_trace_path, "w") as fh:
            fh.write(",".join(wcols) + "\n")
            for t in range(self.n_draws):
                row = [str(int(self.iterations[t]))]
                row += [
                    str(int(self.w_hard[t, i, j])) for i in sel for j in range(k)
                ]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, trace_path, w_trace_path):
        with open(trace_path) as fh:
            header = fh.readline().strip().split(",")
            body = [line.strip().split(",") for line in fh if line.strip()]
        col = {name: idx for idx, name in enumerate(header)}
        k = sum(1 for name in header if name.startswith("a_"))
        s = sum(1 for name in header if name.startswith("z_"))
        raw = np.asarray(body, dtype=np.float64) if body else np.empty((0, len(header)))
        t_n = raw.shape[0]

        def block(prefix, labels):
            idx = [col[f"{prefix}{lab}"] for lab in labels]
            return raw[:, idx]

        a = block("a_", range(1, k + 1))
        b = block("b_", range(1, k + 1))
        p = block("p_", range(1, k + 1))
        z = block("z_", range(1, s + 1))
        ld = np.empty((t_n, s, k))
        for i in range(s):
            for j in range(k):
                ld[:, i, j] = raw[:, col[f"logd_{i + 1}_{j + 1}"]]

        with open(w_trace_path) as fh:
            w_header = fh.readline().strip().split(",")
            w_body = [line.strip().split(",") for line in fh if line.strip()]
        w_raw = (
            np.asarray(w_body, dtype=np.float64)
            if w_body
            else np.empty((0, len(w_header)))
        )
        node_ids = sorted({int(name.split("_")[1]) for name in w_header[1:]})
        if node_ids != list(range(len(node_ids))):
            raise ValueError("w_trace does not cover a contiguous node range from 0")
        n = len(node_ids)
        w_hard = np.zeros((t_n, n, k))
        w_col = {name: idx for idx, name in enumerate(w_header)}
        for i in range(n):
            for j in range(k):
                w_hard[:, i, j] = w_raw[:, w_col[f"w_{i}_{j + 1}"]]

        return cls(
            iterations=raw[:, col["iteration"]].astype(np.int64),
            u=raw[:, col["U"]],
            hmc_accept=raw[:, col["hmc_accept"]].astype(bool),
            exch_accept=raw[:, col["exch_accept"]].astype(bool),
            exch_skipped=np.zeros(t_n, dtype=bool),
            step_sizes=raw[:, col["h"]],
            a=a,
            b=b,
            p=p,
            offsets=z,
            log_loadings=ld,
            w_hard=w_hard,
            w_relaxed=None,
        )


def run_chain(
    data,
    init,
    hmc_cfg,
    exch_cfg,
    iterations,
    rng,
    thin=1,
    anneal_from=None,
):
    """Alternate HMC and exchange moves, adapting during warmup.

    Warmup adapts the step size by dual averaging toward the target
    acceptance, the kinetic diagonal from per-coordinate position
    variances, and the exchange window toward its target rate; all
    three freeze afterward.  Post-warmup draws are recorded raw every
    `thin` iterations; label resolution happens in the summaries.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if thin < 1:
        raise ValueError(f"thin must be >= 1, got {thin}")
    if anneal_from is not None and not anneal_from > 0.0:
        raise ValueError(f"anneal_from must be positive, got {anneal_from}")
    try:
        if not rank_ok(_relaxed_x(init)[1]):
            raise InitializationError("initial structured matrix is rank-deficient")
    except ValueError as err:
        raise InitializationError(str(err)) from err

    state = init
    tau_target = init.tau
    warmup = hmc_cfg.warmup
    m = _pack(state.subject_params, state.logits).size
    omega = np.ones(m) if hmc_cfg.mass is None else hmc_cfg.mass.copy()
    if omega.size != m:
        raise InitializationError(
            f"mass has {omega.size} entries, state has {m} coordinates"
        )
    window = np.full(state.depth, exch_cfg.window)
    window_scale = 1.0

    # dual averaging (target: hmc_cfg.target_accept)
    step = hmc_cfg.step_size
    mu = np.log(10.0 * step)
    log_step_avg = np.log(step)
    accept_stat = 0.0
    da_gamma, da_t0, da_kappa = 0.05, 10.0, 0.75

    # per-coordinate position variance for the kinetic diagonal
    var_count = 0
    var_mean = np.zeros(m)
    var_m2 = np.zeros(m)
    collect_from = warmup // 10
    refresh_points = {warmup // 2, (3 * warmup) // 4} - {0}

    exch_window_block = 0
    exch_window_accepts = 0
    hmc_total = 0
    exch_total = 0
    skip_total = 0

    records = []
    u_cur = None
    for t in range(iterations):
        if anneal_from is not None and warmup > 0:
            frac = min(1.0, t / warmup)
            tau_t = anneal_from + (tau_target - anneal_from) * frac
            if tau_t != state.tau:
                retempered = dataclasses.replace(state, tau=tau_t)
                # a temperature change can only be taken if it keeps the
                # relaxed matrix full rank
                if rank_ok(_relaxed_x(retempered)[1]):
                    state = retempered
                    u_cur = None

        state, hmc_acc, alpha, u_cur = _hmc_step(
            state, data, rng, step, hmc_cfg.leapfrog_steps, omega, u_cur
        )

        if t < warmup:
            t1 = t + 1
            accept_stat += (hmc_cfg.target_accept - alpha - accept_stat) / (t1 + da_t0)
            log_step = mu - np.sqrt(t1) / da_gamma * accept_stat
            eta = t1 ** (-da_kappa)
            log_step_avg = eta * log_step + (1.0 - eta) * log_step_avg
            step = float(np.exp(log_step))

            if t >= collect_from:
                var_count += 1
                pos = _pack(state.subject_params, state.logits)
                delta = pos - var_mean
                var_mean += delta / var_count
                var_m2 += delta * (pos - var_mean)
            if t1 in refresh_points and var_count > 10:
                var = var_m2 / (var_count - 1)
                omega = np.clip(
                    (var_count * var + 5.0) / (var_count + 5.0), 1e-4, 1e4
                )
        elif t == warmup:
            step = float(np.exp(log_step_avg))

        state, exch_acc, exch_skip, u_cur = _exchange_step(
            state, data, exch_cfg, rng, window * window_scale, u_cur
        )
        hmc_total += int(hmc_acc)
        exch_total += int(exch_acc)
        skip_total += int(exch_skip)

        if t < warmup:
            exch_window_block += 1
            exch_window_accepts += int(exch_acc)
            if exch_window_block == 50:
                rate = exch_window_accepts / 50.0
                window_scale *= float(np.exp(0.8 * (rate - exch_cfg.target_accept)))
                window_scale = float(np.clip(window_scale, 1e-2, 40.0))
                exch_window_block = 0
                exch_window_accepts = 0

        if t >= warmup and (t - warmup) % thin == 0:
            rec = state
            records.append(
                (
                    t,
                    u_cur if u_cur is not None else potential(state, data),
                    hmc_acc,
                    exch_acc,
                    exch_skip,
                    step,
                    rec.values.a.copy(),
                    rec.values.b.copy(),
                    rec.probs.p.copy(),
                    rec.subject_params.offsets.copy(),
                    rec.subject_params.log_loadings.copy(),
                    rec.relaxed_weights(),
                    rec.hard_weights(),
                )
            )

    k = state.depth
    s_n = state.subject_params.n_subjects
    n = state.n_nodes
    t_n = len(records)

    def stack(idx, shape, dtype=np.float64):
        out = np.empty((t_n,) + shape, dtype=dtype)
        for r, rec in enumerate(records):
            out[r] = rec[idx]
        return out

    log = SampleLog(
        iterations=np.asarray([r[0] for r in records], dtype=np.int64),
        u=np.asarray([r[1] for r in records], dtype=np.float64),
        hmc_accept=np.asarray([r[2] for r in records], dtype=bool),
        exch_accept=np.asarray([r[3] for r in records], dtype=bool),
        exch_skipped=np.asarray([r[4] for r in records], dtype=bool),
        step_sizes=np.asarray([r[5] for r in records], dtype=np.float64),
        a=stack(6, (k,)),
        b=stack(7, (k,)),
        p=stack(8, (k,)),
        offsets=stack(9, (s_n,)),
        log_loadings=stack(10, (s_n, k)),
        w_relaxed=stack(11, (n, k)),
        w_hard=stack(12, (n, k)),
        meta={
            "iterations": iterations,
            "warmup": warmup,
            "thin": thin,
            "final_step_size": step,
            "window_scale": window_scale,
            "tau": tau_target,
            "n": n,
            "k": k,
            "n_subjects": s_n,
            "hmc_accept_rate": hmc_total / iterations if iterations else 0.0,
            "exch_accept_rate": exch_total / iterations if iterations else 0.0,
            "exch_skip_count": skip_total,
            "mass_range": [float(omega.min()), float(omega.max())],
        },
        init_state=init,
    )
    return log
