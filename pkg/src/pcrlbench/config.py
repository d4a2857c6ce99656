"""Run configuration: one declarative file, overridable by CLI flags.

The config file is YAML (JSON parses as YAML), flat keys as below.  The
effective configuration is hashed into the run manifest so artifacts can be
traced back to an exact setup.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from pcrlbench.models import ConfigurationError, SsmModel
from pcrlbench.registry import build_model
from pcrlbench.smc import AdaSchedule

OUTPUT_ROOT_ENV = "PCRLBENCH_OUT"


@dataclass
class RunConfig:
    """Everything a pipeline run needs, with desk-scale defaults."""

    model: str = ""
    model_options: dict = field(default_factory=dict)
    mc_runs: int = 100
    horizon: int = 300
    particles: int = 2000
    ref_multiplier: int = 20
    ref_replicates: int = 5
    ref_delta: float = 0.999
    schedule_mode: str = "shrinkage"
    schedule_delta: float = 0.98
    schedule_gamma: float = 0.97
    schedule_q0_scale: float = 1e-2
    epsilon: list = field(default_factory=lambda: [0.01])
    alpha: list = field(default_factory=lambda: [0.001])
    rho: float = 0.7
    seed: int = 0
    workers: int = 1
    out_dir: str = ""

    def validate(self) -> None:
        if not self.model:
            raise ConfigurationError("missing required field: model")
        for key in ("mc_runs", "horizon", "particles", "ref_multiplier", "ref_replicates"):
            if int(getattr(self, key)) < 1:
                raise ConfigurationError(f"{key} must be a positive integer")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigurationError("rho must be in (0, 1]")
        for name in ("epsilon", "alpha"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size == 0 or np.any(vals <= 0.0):
                raise ConfigurationError(f"{name} entries must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def build_model(self) -> SsmModel:
        return build_model(self.model, self.model_options)

    def schedule(self) -> AdaSchedule:
        return AdaSchedule(
            mode=self.schedule_mode,
            delta=self.schedule_delta,
            gamma=self.schedule_gamma,
            q0_scale=self.schedule_q0_scale,
        )

    def reference_schedule(self) -> AdaSchedule:
        return AdaSchedule(mode="shrinkage", delta=self.ref_delta)

    def tolerances(self, param_dim: int):
        eps = np.asarray(self.epsilon, dtype=float).reshape(-1)
        alp = np.asarray(self.alpha, dtype=float).reshape(-1)
        if eps.size == 1:
            eps = np.full(param_dim, eps[0])
        if alp.size == 1:
            alp = np.full(param_dim, alp[0])
        if eps.size != param_dim or alp.size != param_dim:
            raise ConfigurationError("epsilon/alpha length does not match parameter dimension")
        return eps, alp

    def resolved_out_dir(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
        return Path(root) / f"{self.model}-seed{self.seed}"

    def config_hash(self) -> str:
        data = asdict(self)
        blob = json.dumps(data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Build a RunConfig from an optional YAML/JSON file plus flag overrides."""
    data: dict = {}
    if path:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ConfigurationError(f"config file {path} must contain a mapping")
            data.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg
