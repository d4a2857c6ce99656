"""CSV/JSON artifact persistence with a stable column contract.

All floats are written with repr-precision ('%.17g') so that equal runs
produce byte-identical files; the figure tooling consumes these schemas
verbatim.  Every stage records its outputs in the run manifest with a
sha256 checksum.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from pcrlbench.models import TrajectoryEnsemble
from pcrlbench.pcrlb import BoundSeries


def fmt(x) -> str:
    return format(float(x), ".17g")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_csv(path: Path, header: list[str], rows: Iterable[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------- ensemble

def write_ensemble_csv(path: Path, ensemble: TrajectoryEnsemble) -> None:
    """One row per (trajectory, t); measurement/input columns are empty at t=0."""
    n = ensemble.states.shape[2]
    m = ensemble.measurements.shape[2]
    q = ensemble.params.shape[1]
    header = (
        ["traj", "t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"theta_{i + 1}" for i in range(q)]
        + [f"y_{i + 1}" for i in range(m)]
        + [f"u_{i + 1}" for i in range(n)]
    )

    def rows():
        for j in range(ensemble.count):
            theta = [fmt(v) for v in ensemble.params[j]]
            for t in range(ensemble.horizon + 1):
                row = [j, t] + [fmt(v) for v in ensemble.states[j, t]] + theta
                if t >= 1:
                    row += [fmt(v) for v in ensemble.measurements[j, t - 1]]
                    row += [fmt(v) for v in ensemble.inputs[t - 1]]
                else:
                    row += [""] * (m + n)
                yield row

    write_csv(path, header, rows())


def read_ensemble_csv(path: Path, state_dim: int, param_dim: int, meas_dim: int) -> TrajectoryEnsemble:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        records = list(reader)
    if not records:
        raise ValueError(f"{path} holds no data rows")
    count = int(records[-1]["traj"]) + 1
    horizon = int(records[-1]["t"])
    states = np.empty((count, horizon + 1, state_dim))
    params = np.empty((count, param_dim))
    measurements = np.empty((count, horizon, meas_dim))
    inputs = np.empty((horizon, state_dim))
    for rec in records:
        j, t = int(rec["traj"]), int(rec["t"])
        states[j, t] = [float(rec[f"x_{i + 1}"]) for i in range(state_dim)]
        params[j] = [float(rec[f"theta_{i + 1}"]) for i in range(param_dim)]
        if t >= 1:
            measurements[j, t - 1] = [float(rec[f"y_{i + 1}"]) for i in range(meas_dim)]
            inputs[t - 1] = [float(rec[f"u_{i + 1}"]) for i in range(state_dim)]
    return TrajectoryEnsemble(
        states=states, params=params, measurements=measurements, inputs=inputs, seed=-1,
    )


# ------------------------------------------------------------------- bound

def write_bound_csv(path: Path, bound: BoundSeries) -> None:
    q = bound.diagonals.shape[1]
    header = ["t"] + [f"L_diag_{i + 1}" for i in range(q)] + ["cond_Jx", "regularization_events"]
    rows = []
    for k, t in enumerate(bound.times):
        rows.append(
            [int(t)]
            + [fmt(v) for v in bound.diagonals[k]]
            + [fmt(bound.cond_jx[k]), int(bound.reg_events[k])]
        )
    write_csv(path, header, rows)


def read_bound_diagonals(path: Path):
    """Return (times, diagonals) from a bound CSV."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [c for c in reader.fieldnames if c.startswith("L_diag_")]
        times, diags = [], []
        for rec in reader:
            times.append(int(rec["t"]))
            diags.append([float(rec[c]) for c in cols])
    return np.asarray(times), np.asarray(diags)


def write_bound_summary(path: Path, bound: BoundSeries) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "horizon": int(bound.times[-1]),
        "final_bound_diagonal": [float(v) for v in bound.diagonals[-1]],
        "total_regularization_events": int(bound.reg_events.sum()),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------- estimates

ESTIMATE_HEADER_FIXED = ["run_index", "t"]


def write_estimates_csv(path: Path, run_index: int, estimates, ess, resampled) -> None:
    q = estimates.shape[1]
    header = ESTIMATE_HEADER_FIXED + [f"theta_hat_{i + 1}" for i in range(q)] + ["ess", "resampled"]
    rows = []
    for k in range(estimates.shape[0]):
        rows.append(
            [run_index, k + 1]
            + [fmt(v) for v in estimates[k]]
            + [fmt(ess[k]), int(resampled[k])]
        )
    write_csv(path, header, rows)


def concat_estimate_files(per_run_paths: list[Path], out_path: Path) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as out:
        for idx, part in enumerate(per_run_paths):
            text = part.read_text()
            lines = text.splitlines(keepends=True)
            out.writelines(lines if idx == 0 else lines[1:])


def read_estimates_csv(path: Path, param_dim: int):
    """Return estimates (M, T, q) keyed by run_index and step, order-independent."""
    by_run: dict[int, dict[int, list[float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            run = int(rec["run_index"])
            t = int(rec["t"])
            by_run.setdefault(run, {})[t] = [
                float(rec[f"theta_hat_{i + 1}"]) for i in range(param_dim)
            ]
    runs = sorted(by_run)
    if runs != list(range(len(runs))):
        raise ValueError(f"{path}: run indices are not contiguous from 0")
    horizon = max(by_run[runs[0]])
    est = np.empty((len(runs), horizon, param_dim))
    for run in runs:
        steps = by_run[run]
        if sorted(steps) != list(range(1, horizon + 1)):
            raise ValueError(f"{path}: run {run} does not cover t=1..{horizon}")
        for t, vals in steps.items():
            est[run, t - 1] = vals
    return est


# ---------------------------------------------------------------- analysis

def write_biases_csv(path: Path, conditional) -> None:
    """conditional: (M, T, q) per-run conditional biases."""
    m_count, horizon, q = conditional.shape
    header = ["run_index", "t"] + [f"bias_{i + 1}" for i in range(q)]

    def rows():
        for j in range(m_count):
            for t in range(horizon):
                yield [j, t + 1] + [fmt(v) for v in conditional[j, t]]

    write_csv(path, header, rows())


def write_analysis_csv(path: Path, verdict) -> None:
    q = verdict.frac_within_eps.shape[1]
    header = (
        ["t", "trace_P", "trace_L", "min_eig_gap"]
        + [f"frac_within_eps_{i + 1}" for i in range(q)]
        + [f"mean_bias_{i + 1}" for i in range(q)]
        + [f"mse_diag_{i + 1}" for i in range(q)]
        + [f"bound_diag_{i + 1}" for i in range(q)]
        + ["eps_efficient"]
        + [f"eps_unbiased_{i + 1}" for i in range(q)]
        + [f"alpha_unbiased_{i + 1}" for i in range(q)]
    )
    rows = []
    trace_bound = verdict.bound_diag.sum(axis=1)
    for k, t in enumerate(verdict.times):
        rows.append(
            [int(t), fmt(verdict.trace_gap[k] + trace_bound[k]), fmt(trace_bound[k]),
             fmt(verdict.min_eig_gap[k])]
            + [fmt(v) for v in verdict.frac_within_eps[k]]
            + [fmt(v) for v in verdict.mean_bias[k]]
            + [fmt(v) for v in verdict.mse_diag[k]]
            + [fmt(v) for v in verdict.bound_diag[k]]
            + [int(verdict.eps_efficient[k])]
            + [int(v) for v in verdict.eps_unbiased[k]]
            + [int(v) for v in verdict.alpha_unbiased[k]]
        )
    write_csv(path, header, rows)


def write_analysis_summary(path: Path, verdict, provenance: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    q = verdict.frac_within_eps.shape[1]
    final = {
        "t": int(verdict.times[-1]),
        "eps_efficient": bool(verdict.eps_efficient[-1]),
        "per_parameter": [
            {
                "index": i + 1,
                "frac_within_eps": float(verdict.frac_within_eps[-1, i]),
                "eps_unbiased": bool(verdict.eps_unbiased[-1, i]),
                "eps_mmse": bool(verdict.eps_mmse[-1, i]),
                "alpha_unbiased": bool(verdict.alpha_unbiased[-1, i]),
                "mean_bias": float(verdict.mean_bias[-1, i]),
                "mse": float(verdict.mse_diag[-1, i]),
                "bound": float(verdict.bound_diag[-1, i]),
            }
            for i in range(q)
        ],
        "negative_gap_steps": int((verdict.min_eig_gap < 0).sum()),
        "reference": provenance,
    }
    path.write_text(json.dumps(final, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- manifest

class Manifest:
    """Run manifest: config (hashed and verbatim), versions, stage timings,
    and every produced file with its checksum."""

    def __init__(self, path: Path, config_hash: str, seed: int, config: Optional[dict] = None):
        self.path = path
        self.data = {
            "config_hash": config_hash,
            "seed": seed,
            "config": config or {},
            "versions": _versions(),
            "stages": {},
            "files": {},
        }
        if path.exists():
            try:
                previous = json.loads(path.read_text())
                if previous.get("config_hash") == config_hash:
                    self.data["stages"].update(previous.get("stages", {}))
                    self.data["files"].update(previous.get("files", {}))
            except (ValueError, OSError):
                pass

    def record_stage(self, stage: str, wall_seconds: float, files: list[Path]) -> None:
        self.data["stages"][stage] = {
            "wall_seconds": round(wall_seconds, 3),
            "completed_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        for f in files:
            self.data["files"][str(f.name)] = {
                "stage": stage,
                "sha256": sha256_file(f),
                "bytes": f.stat().st_size,
            }
        self.write()

    def write(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    import scipy

    from pcrlbench import __version__

    return {"pcrlbench": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
