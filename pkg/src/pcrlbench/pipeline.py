"""Pipeline stages behind the CLI: bound, identify, analyze.

Each stage is a pure function of (config, seed, upstream files) and records
its outputs in the run manifest.  Per-run work is distributed over a process
pool when ``workers > 1``; every run owns a seed-keyed RNG substream, so
results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from pcrlbench.analysis import BiasRecord, classify, mse_mc, reference_posterior_mean
from pcrlbench.config import RunConfig
from pcrlbench.models import DegeneracyError
from pcrlbench.pcrlb import BoundSeries, run_pcrlb
from pcrlbench.runio import (
    Manifest,
    concat_estimate_files,
    fmt,
    read_ensemble_csv,
    write_analysis_csv,
    write_analysis_summary,
    write_biases_csv,
    write_bound_csv,
    write_bound_summary,
    write_ensemble_csv,
    write_estimates_csv,
)
from pcrlbench.smc import identify


def _manifest(cfg: RunConfig, out_dir: Path) -> Manifest:
    return Manifest(out_dir / "manifest.json", cfg.config_hash(), cfg.seed, cfg.__dict__.copy())


def stage_bound(cfg: RunConfig, out_dir: Path) -> list[Path]:
    """Simulate the ensemble and compute the bound series; write both."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(cfg, out_dir)
    t0 = time.time()
    model = cfg.build_model()
    result = run_pcrlb(model, cfg.mc_runs, cfg.horizon, cfg.seed)
    files = [
        out_dir / "ensemble.csv",
        out_dir / "bound.csv",
        out_dir / "bound_full.csv",
        out_dir / "bound_summary.json",
    ]
    write_ensemble_csv(files[0], result.ensemble)
    write_bound_csv(files[1], result.bound)
    _write_bound_full(files[2], result.bound)
    write_bound_summary(files[3], result.bound)
    manifest.record_stage("bound", time.time() - t0, files)
    return files


def _write_bound_full(path: Path, bound: BoundSeries) -> None:
    q = bound.diagonals.shape[1]
    header = ["t"] + [f"L_{i + 1}_{j + 1}" for i in range(q) for j in range(q)]
    rows = []
    for k, t in enumerate(bound.times):
        rows.append([int(t)] + [fmt(v) for v in np.asarray(bound.matrices[k]).ravel()])
    from pcrlbench.runio import write_csv

    write_csv(path, header, rows)


def _read_bound_full(path: Path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [c for c in reader.fieldnames if c.startswith("L_")]
        q = int(np.sqrt(len(cols)))
        times, mats = [], []
        for rec in reader:
            times.append(int(rec["t"]))
            mats.append(np.array([float(rec[c]) for c in cols]).reshape(q, q))
    return np.asarray(times), mats


def _identify_worker(args):
    cfg_dict, run_index, measurements, inputs = args
    cfg = RunConfig(**cfg_dict)
    model = cfg.build_model()
    result = identify(
        model,
        measurements,
        inputs,
        cfg.particles,
        schedule=cfg.schedule(),
        seed=cfg.seed,
        stream=(run_index,),
    )
    return run_index, result.estimates, result.ess, result.resampled


def _estimate_file(runs_dir: Path, j: int) -> Path:
    return runs_dir / f"est_{j:04d}.csv"


def _is_complete(path: Path, horizon: int) -> bool:
    if not path.exists():
        return False
    with open(path) as fh:
        return sum(1 for _ in fh) == horizon + 1


def stage_identify(cfg: RunConfig, out_dir: Path) -> list[Path]:
    """Run the identifier over every simulated measurement record.

    Per-run estimate files already present and complete are kept as-is, so an
    interrupted stage resumes where it stopped.  Runs whose particle weights
    degenerate are skipped and flagged in the manifest.
    """
    manifest = _manifest(cfg, out_dir)
    t0 = time.time()
    ensemble_path = out_dir / "ensemble.csv"
    if not ensemble_path.exists():
        raise FileNotFoundError(f"missing upstream file {ensemble_path}; run the bound stage first")
    model = cfg.build_model()
    ensemble = read_ensemble_csv(ensemble_path, model.state_dim, model.param_dim, model.meas_dim)

    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    pending = [
        j for j in range(ensemble.count)
        if not _is_complete(_estimate_file(runs_dir, j), ensemble.horizon)
    ]
    cfg_dict = cfg.__dict__.copy()
    tasks = [(cfg_dict, j, ensemble.measurements[j], ensemble.inputs) for j in pending]
    degenerate: list[int] = []

    def handle(out) -> None:
        run_index, payload = out
        if payload is None:
            degenerate.append(run_index)
            return
        estimates, ess, resampled = payload
        write_estimates_csv(_estimate_file(runs_dir, run_index), run_index, estimates, ess, resampled)

    if cfg.workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for out in pool.map(_identify_worker_safe, tasks):
                handle(out)
    else:
        for task in tasks:
            handle(_identify_worker_safe(task))

    produced = [
        _estimate_file(runs_dir, j)
        for j in range(ensemble.count)
        if _estimate_file(runs_dir, j).exists()
    ]
    if not produced:
        raise DegeneracyError("every identification run degenerated; nothing to combine")
    combined = out_dir / "estimates.csv"
    concat_estimate_files(produced, combined)
    manifest.data["degenerate_runs"] = sorted(degenerate)
    manifest.record_stage("identify", time.time() - t0, produced + [combined])
    return [combined]


def _identify_worker_safe(args):
    run_index = args[1]
    try:
        _, estimates, ess, resampled = _identify_worker(args)
    except DegeneracyError:
        return run_index, None
    return run_index, (estimates, ess, resampled)


def _reference_worker(args):
    cfg_dict, run_index, measurements, inputs, estimates = args
    cfg = RunConfig(**cfg_dict)
    model = cfg.build_model()
    ref = reference_posterior_mean(
        model,
        measurements,
        inputs,
        cfg.ref_multiplier * cfg.particles,
        seed=cfg.seed,
        replicates=cfg.ref_replicates,
        schedule=cfg.reference_schedule(),
        stream=(run_index,),
    )
    return run_index, ref.values[1:] - estimates


def read_estimate_runs(path: Path, param_dim: int):
    """Estimates keyed by run id: returns (run_ids, array (M, T, q))."""
    by_run: dict[int, dict[int, list[float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            run = int(rec["run_index"])
            by_run.setdefault(run, {})[int(rec["t"])] = [
                float(rec[f"theta_hat_{i + 1}"]) for i in range(param_dim)
            ]
    run_ids = sorted(by_run)
    if not run_ids:
        raise ValueError(f"{path} holds no estimate rows")
    horizon = max(by_run[run_ids[0]])
    est = np.empty((len(run_ids), horizon, param_dim))
    for k, run in enumerate(run_ids):
        steps = by_run[run]
        if sorted(steps) != list(range(1, horizon + 1)):
            raise ValueError(f"{path}: run {run} does not cover t=1..{horizon}")
        for t, vals in steps.items():
            est[k, t - 1] = vals
    return run_ids, est


def stage_analyze(cfg: RunConfig, out_dir: Path) -> list[Path]:
    """Module-3 analysis: MSE, reference biases, classification, PSD gap."""
    manifest = _manifest(cfg, out_dir)
    t0 = time.time()
    model = cfg.build_model()
    for name in ("ensemble.csv", "estimates.csv", "bound_full.csv"):
        if not (out_dir / name).exists():
            raise FileNotFoundError(f"missing upstream file {out_dir / name}")

    ensemble = read_ensemble_csv(
        out_dir / "ensemble.csv", model.state_dim, model.param_dim, model.meas_dim
    )
    run_ids, estimates = read_estimate_runs(out_dir / "estimates.csv", model.param_dim)
    truths = ensemble.params[run_ids]
    if estimates.shape[1] != ensemble.horizon:
        raise ValueError("estimates horizon does not match ensemble horizon")

    bound_times, bound_mats = _read_bound_full(out_dir / "bound_full.csv")
    bound = BoundSeries(
        times=bound_times,
        matrices=bound_mats,
        diagonals=np.array([np.diag(m) for m in bound_mats]),
        cond_jx=np.zeros(len(bound_mats)),
        reg_events=np.zeros(len(bound_mats), dtype=int),
    )

    cfg_dict = cfg.__dict__.copy()
    tasks = [
        (cfg_dict, run, ensemble.measurements[run], ensemble.inputs, estimates[k])
        for k, run in enumerate(run_ids)
    ]
    biases = np.empty_like(estimates)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for run_index, bias in pool.map(_reference_worker, tasks):
                biases[run_ids.index(run_index)] = bias
    else:
        for task in tasks:
            run_index, bias = _reference_worker(task)
            biases[run_ids.index(run_index)] = bias

    mse = mse_mc(truths, estimates)
    record = BiasRecord(
        times=mse.times,
        conditional=biases,
        provenance={
            "n_ref": cfg.ref_multiplier * cfg.particles,
            "replicates": cfg.ref_replicates,
            "ref_delta": cfg.ref_delta,
            "runs": len(run_ids),
        },
    )
    eps, alpha = cfg.tolerances(model.param_dim)
    verdict = classify(mse, bound, record, eps, alpha, cfg.rho)

    files = [out_dir / "analysis.csv", out_dir / "biases.csv", out_dir / "analysis_summary.json"]
    write_analysis_csv(files[0], verdict)
    write_biases_csv(files[1], biases)
    write_analysis_summary(files[2], verdict, record.provenance)
    manifest.record_stage("analyze", time.time() - t0, files)
    return files


def stage_all(cfg: RunConfig, out_dir: Path) -> list[Path]:
    files = stage_bound(cfg, out_dir)
    files += stage_identify(cfg, out_dir)
    files += stage_analyze(cfg, out_dir)
    return files
