"""Command-line pipeline: simulate -> fit -> summarize.

Each subcommand reads a JSON config, applies flag overrides, writes its
effective config next to its outputs, and is deterministic given the
seed.  Exit codes: 0 success, 2 config or data validation problem,
3 runtime failure (rank or initialization).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.special import logit

from .diagnostics import partition_recovery, subspace_error, summarize
from .model import NetworkDataset, SubjectParams, simulate_dataset
from .partition import RecursivePartition, random_partition
from .prior import ColumnValues, MixtureProbs, PriorRejectionError
from .sampler import (
    ChainState,
    ExchangeConfig,
    HmcConfig,
    InitializationError,
    SampleLog,
    initial_state,
    run_chain,
)
from .whitening import NotPositiveDefiniteError


class ConfigError(ValueError):
    """Bad or missing configuration value; message names the field."""


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _require(cfg, name, kind):
    if name not in cfg:
        raise ConfigError(f"missing config field: {name}")
    value = cfg[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"config field {name} must be {kind.__name__}")
    return value

def _optional(cfg, name, kind, default):
    if name not in cfg or cfg[name] is None:
        return default
    return _require(cfg, name, kind)


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def cmd_simulate(cfg, out_dir):
    n = _require(cfg, "n", int)
    k = _require(cfg, "k", int)
    n_subjects = _require(cfg, "subjects", int)
    seed = _require(cfg, "seed", int)
    lo = _optional(cfg, "loading_min", float, 20.0)
    hi = _optional(cfg, "loading_max", float, 40.0)
    offset = _optional(cfg, "offset", float, float(logit(0.1)))
    if n < 2 or k < 1 or k > n:
        raise ConfigError("config fields n, k must satisfy n >= 2 and 1 <= k <= n")
    if n_subjects < 1:
        raise ConfigError("config field subjects must be >= 1")
    if not 0.0 < lo <= hi:
        raise ConfigError("config fields loading_min, loading_max must satisfy 0 < min <= max")

    rng = np.random.default_rng(seed)
    a = np.asarray(_optional(cfg, "a", list, [1.0] * k), dtype=np.float64)
    b = np.asarray(_optional(cfg, "b", list, [-1.0] * k), dtype=np.float64)
    if a.size != k or b.size != k:
        raise ConfigError("config fields a, b must hold k values")
    values = ColumnValues(a=a, b=b)
    probs = MixtureProbs(p=np.full(k, 0.5))
    sp = SubjectParams(
        log_loadings=np.log(rng.uniform(lo, hi, size=(n_subjects, k))),
        offsets=np.full(n_subjects, offset),
    )

    from .prior import StructuredMatrix, build_x
    from .whitening import rank_ok

    rp = None
    for _ in range(1000):
        cand = random_partition(n, k, rng)
        w = cand.membership_matrix().astype(np.float64)
        if rank_ok(build_x(StructuredMatrix(w=w, values=values))):
            rp = cand
            break
    if rp is None:
        raise InitializationError(f"no full-rank partition found for n={n}, k={k}")

    data, truth = simulate_dataset(rp, values, probs, sp, rng)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.json").write_text(data.to_json())
    _write_json(out / "truth.json", {
        "partition": json.loads(rp.to_json()),
        "a": a.tolist(),
        "b": b.tolist(),
        "p": probs.p.tolist(),
        "frame": truth["frame"].tolist(),
        "log_loadings": sp.log_loadings.tolist(),
        "offsets": sp.offsets.tolist(),
        "seed": seed,
    })
    _write_json(out / "effective_config.json", {**cfg, "seed": seed, "out": str(out)})
    print(f"wrote {out / 'dataset.json'} (edge density {data.edge_density():.4f})")
    return 0


def _fit_single_chain(args):
    (chain_id, data_text, cfg, seed_words, out_dir) = args
    data = NetworkDataset.from_json(data_text)
    rng = np.random.default_rng(seed_words)
    tau = cfg["tau"]
    state = initial_state(data, cfg["k"], tau, rng)
    hmc_cfg = HmcConfig(
        step_size=cfg["step_size"],
        leapfrog_steps=cfg["leapfrog_steps"],
        target_accept=cfg["target_accept"],
        warmup=cfg["warmup"],
    )
    exch_cfg = ExchangeConfig(
        window=cfg["window"],
        max_rejection_attempts=cfg["max_rejection_attempts"],
    )
    start = time.perf_counter()
    log = run_chain(
        data,
        state,
        hmc_cfg,
        exch_cfg,
        cfg["iterations"],
        rng,
        thin=cfg["thin"],
        anneal_from=cfg["anneal_from"],
    )
    elapsed = time.perf_counter() - start
    chain_dir = Path(out_dir) / f"chain_{chain_id:02d}"
    chain_dir.mkdir(parents=True, exist_ok=True)
    nodes = cfg["w_trace_nodes"]
    log.to_csv(chain_dir / "trace.csv", chain_dir / "w_trace.csv", nodes=nodes)
    return chain_id, {**log.meta, "wall_seconds": elapsed, "n_draws": log.n_draws}


def cmd_fit(cfg, out_dir, seed_override=None, chains_override=None):
    data_path = _require(cfg, "data", str)
    k = _require(cfg, "k", int)
    seed = seed_override if seed_override is not None else _require(cfg, "seed", int)
    chains = chains_override if chains_override is not None else _optional(cfg, "chains", int, 1)
    run_cfg = {
        "k": k,
        "iterations": _require(cfg, "iterations", int),
        "warmup": _optional(cfg, "warmup", int, _require(cfg, "iterations", int) // 2),
        "thin": _optional(cfg, "thin", int, 1),
        "tau": _optional(cfg, "tau", float, 0.2),
        "anneal_from": _optional(cfg, "anneal_from", float, None),
        "step_size": _optional(cfg, "step_size", float, 0.05),
        "leapfrog_steps": _optional(cfg, "leapfrog_steps", int, 10),
        "target_accept": _optional(cfg, "target_accept", float, 0.7),
        "window": _optional(cfg, "window", float, 0.25),
        "max_rejection_attempts": _optional(cfg, "max_rejection_attempts", int, 100),
        "w_trace_nodes": _optional(cfg, "w_trace_nodes", list, None),
    }
    if chains < 1:
        raise ConfigError("config field chains must be >= 1")
    if run_cfg["iterations"] < 1:
        raise ConfigError("config field iterations must be >= 1")
    if run_cfg["warmup"] > run_cfg["iterations"]:
        raise ConfigError("config field warmup cannot exceed iterations")
    if k < 1:
        raise ConfigError("config field k must be >= 1")

    try:
        data_text = Path(data_path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read data file {data_path}: {err}") from err
    NetworkDataset.from_json(data_text)  # validate up front, fail with exit 2

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root_seq = np.random.SeedSequence(seed)
    children = root_seq.spawn(chains)
    jobs = [
        (c, data_text, run_cfg, children[c].generate_state(4).tolist(), str(out))
        for c in range(chains)
    ]
    start = time.perf_counter()
    if chains == 1:
        results = [_fit_single_chain(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=chains) as pool:
            results = list(pool.map(_fit_single_chain, jobs))
    elapsed = time.perf_counter() - start
    per_chain = {f"chain_{cid:02d}": meta for cid, meta in sorted(results)}
    effective = {**cfg, "seed": seed, "chains": chains, **run_cfg, "out": str(out)}
    _write_json(out / "effective_config.json", effective)
    _write_json(out / "run_meta.json", {
        "config": effective,
        "chains": per_chain,
        "wall_seconds": elapsed,
    })
    print(f"fit {chains} chain(s) in {elapsed:.1f}s -> {out}")
    return 0


def _load_truth(path):
    payload = json.loads(Path(path).read_text())
    rp = RecursivePartition.from_json(json.dumps(payload["partition"]))
    frame = np.asarray(payload["frame"], dtype=np.float64)
    return rp, frame


def cmd_summarize(cfg, out_dir, truth_path=None):
    fit_dir = Path(_require(cfg, "fit_dir", str))
    burn_in = _optional(cfg, "burn_in", float, 0.5)
    if not fit_dir.is_dir():
        raise ConfigError(f"config field fit_dir does not name a directory: {fit_dir}")
    chain_dirs = sorted(d for d in fit_dir.glob("chain_*") if d.is_dir())
    if not chain_dirs:
        raise ConfigError(f"no chain_* directories under {fit_dir}")

    logs = [
        SampleLog.from_csv(d / "trace.csv", d / "w_trace.csv") for d in chain_dirs
    ]
    per_chain_ess = {}
    for d, log in zip(chain_dirs, logs):
        per_chain_ess[d.name] = summarize(log, burn_in=burn_in).ess

    pooled = _pool_logs(logs, burn_in)
    summary = summarize(pooled, burn_in=0.0)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = summary.to_dict()
    payload["ess"] = per_chain_ess
    payload["meta"]["chains"] = [d.name for d in chain_dirs]
    payload["meta"]["burn_in"] = burn_in

    if truth_path is not None:
        rp, frame = _load_truth(truth_path)
        recovery = {
            "subspace_error": subspace_error(summary.q_mean, frame),
            "level_recovery": [
                partition_recovery(summary.w_prob, rp, j)
                for j in range(1, rp.depth + 1)
            ],
        }
        payload["recovery"] = recovery

    factors_dir = out / "factors"
    factors_dir.mkdir(exist_ok=True)
    for j, mat in enumerate(summary.factors, start=1):
        with open(factors_dir / f"factor_{j}.csv", "w") as fh:
            for row in mat:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    _write_json(out / "summary.json", payload)
    _write_json(out / "effective_config.json", {**cfg, "out": str(out)})
    print(f"wrote {out / 'summary.json'}")
    return 0


def _pool_logs(logs, burn_in):
    """Concatenate per-chain retained draws into one log for pooling."""
    kept = []
    for log in logs:
        start = int(np.floor(log.n_draws * burn_in))
        kept.append((log, start))
    import dataclasses as dc

    def cat(name):
        return np.concatenate([getattr(log, name)[start:] for log, start in kept])

    first = logs[0]
    return dc.replace(
        first,
        iterations=cat("iterations"),
        u=cat("u"),
        hmc_accept=cat("hmc_accept"),
        exch_accept=cat("exch_accept"),
        exch_skipped=cat("exch_skipped"),
        step_sizes=cat("step_sizes"),
        a=cat("a"),
        b=cat("b"),
        p=cat("p"),
        offsets=cat("offsets"),
        log_loadings=cat("log_loadings"),
        w_hard=cat("w_hard"),
        w_relaxed=None,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msfactor",
        description="Multi-scale factor modeling of binary network populations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "generate a synthetic dataset with known structure"),
        ("fit", "run the posterior sampler on a dataset"),
        ("summarize", "reduce fitted chains to posterior summaries"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--chains", type=int, default=None, help="override chain count")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--truth", default=None, help="truth file for recovery metrics")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        out_dir = args.out if args.out is not None else cfg.get("out", ".")
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "fit":
            return cmd_fit(cfg, out_dir, seed_override=args.seed,
                           chains_override=args.chains)
        return cmd_summarize(cfg, out_dir, truth_path=args.truth)
    except (ConfigError, ValueError) as err:
        if isinstance(err, NotPositiveDefiniteError):
            print(f"error: {err}", file=sys.stderr)
            return 3
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (InitializationError, PriorRejectionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
