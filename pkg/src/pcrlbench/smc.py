"""Sequential Monte Carlo identifier over the extended state.

Static parameters are given artificial dynamics so the filter can explore
parameter space: either an independent Gaussian random walk with
geometrically decaying covariance, or kernel shrinkage toward the weighted
particle mean (mean/covariance preserving).  Weights live in log space
throughout; resampling is systematic and triggers when the effective sample
size drops below half the particle count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from pcrlbench import rng as rngmod
from pcrlbench.models import ConfigurationError, DegeneracyError, SsmModel, gaussian_logpdf

Array = np.ndarray

_SUPPORT_REDRAWS = 10


@dataclass(frozen=True)
class AdaSchedule:
    """Artificial-dynamics schedule for the parameter particles.

    ``constant-decay``: add N(0, gamma**t * q0) jitter at step t.
    ``shrinkage``: pull particles toward the weighted mean with factor delta
    and add kernel noise scaled to preserve the weighted covariance.
    """

    mode: str = "shrinkage"
    q0_scale: float = 1e-2
    q0: Optional[Array] = None
    gamma: float = 0.97
    delta: float = 0.98

    def __post_init__(self):
        if self.mode not in ("shrinkage", "constant-decay"):
            raise ConfigurationError(f"unknown schedule mode {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must be in (0, 1]")
        if self.mode == "shrinkage" and not 0.9 < self.delta <= 1.0:
            raise ConfigurationError("shrinkage discount must be in (0.9, 1]")
        if self.q0 is not None:
            q0 = np.asarray(self.q0, dtype=float)
            eigs = np.linalg.eigvalsh(0.5 * (q0 + q0.T))
            if eigs.min() < -1e-12:
                raise ConfigurationError("initial jitter covariance must be PSD")

    def jitter_cov(self, param_dim: int, t: int) -> Array:
        base = self.q0 if self.q0 is not None else self.q0_scale * np.eye(param_dim)
        return self.gamma ** t * np.asarray(base, dtype=float)


@dataclass
class ParticleCloud:
    """Weighted extended-state particles at one time step.

    ``log_weights`` are kept normalized (logsumexp == 0).  ``ess`` is always
    derived from the current weights; ``ess_at_weighting`` records the value
    that drove the resampling decision of the step that produced this cloud.
    """

    x: Array
    theta: Array
    log_weights: Array
    t: int
    resampled: bool = False
    ess_at_weighting: Optional[float] = None

    @property
    def n_particles(self) -> int:
        return self.x.shape[0]

    @property
    def weights(self) -> Array:
        return np.exp(self.log_weights)

    @property
    def ess(self) -> float:
        w = self.weights
        return float(1.0 / np.sum(w * w))


def init_cloud(model: SsmModel, n_particles: int, rng: np.random.Generator) -> ParticleCloud:
    """Draw the prior cloud: uniform weights, ESS equal to the count."""
    if n_particles < 1:
        raise ConfigurationError("n_particles must be >= 1")
    chol = np.linalg.cholesky(model.prior_cov)
    draws = model.prior_mean + rng.standard_normal((n_particles, model.extended_dim)) @ chol.T
    n = model.state_dim
    return ParticleCloud(
        x=draws[:, :n].copy(),
        theta=draws[:, n:].copy(),
        log_weights=np.full(n_particles, -np.log(n_particles)),
        t=0,
    )


def resample_systematic(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Systematic resampling: one uniform draw, stratified positions.

    Particle i receives on average n * w_i offspring; weights reset to 1/n.
    """
    n = cloud.n_particles
    w = cloud.weights
    positions = (rng.uniform() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(w), positions, side="right")
    idx = np.minimum(idx, n - 1)
    return ParticleCloud(
        x=cloud.x[idx].copy(),
        theta=cloud.theta[idx].copy(),
        log_weights=np.full(n, -np.log(n)),
        t=cloud.t,
        resampled=True,
        ess_at_weighting=cloud.ess_at_weighting,
    )


def posterior_mean(cloud: ParticleCloud) -> Array:
    """Weighted mean of the parameter components."""
    return cloud.weights @ cloud.theta


def _weighted_moments(theta: Array, w: Array):
    mean = w @ theta
    centered = theta - mean
    cov = (centered * w[:, None]).T @ centered
    return mean, 0.5 * (cov + cov.T)


def _jitter(cloud: ParticleCloud, model: SsmModel, schedule: AdaSchedule,
            t: int, rng: np.random.Generator) -> Array:
    """Move parameter particles per the schedule, honoring the support guard."""
    q = model.param_dim
    if q == 0:
        return cloud.theta.copy()
    n = cloud.n_particles
    w = cloud.weights

    if schedule.mode == "constant-decay":
        cov = schedule.jitter_cov(q, t - 1)
        chol = _psd_chol(cov)

        def propose(count, base):
            return base + rng.standard_normal((count, q)) @ chol.T

        base_all = cloud.theta
    else:
        delta = schedule.delta
        mean, cov = _weighted_moments(cloud.theta, w)
        chol = _psd_chol((1.0 - delta**2) * cov)

        def propose(count, base):
            return delta * base + (1.0 - delta) * mean + rng.standard_normal((count, q)) @ chol.T

        base_all = cloud.theta

    theta_new = propose(n, base_all)
    if model.param_constraint is not None:
        bad = ~np.asarray(model.param_constraint(theta_new), dtype=bool)
        for _ in range(_SUPPORT_REDRAWS):
            if not bad.any():
                break
            theta_new[bad] = propose(int(bad.sum()), base_all[bad])
            bad = ~np.asarray(model.param_constraint(theta_new), dtype=bool)
    return theta_new


def _psd_chol(cov: Array) -> Array:
    """Cholesky with an eigenvalue-clipping fallback for semidefinite input."""
    if cov.size == 0:
        return cov
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def ada_step(
    cloud: ParticleCloud,
    y: Array,
    u: Array,
    model: SsmModel,
    schedule: AdaSchedule,
    t: int,
    rng: np.random.Generator,
) -> ParticleCloud:
    """Advance the cloud from t-1 to t against measurement y_t.

    Jitter parameters, propagate states through the transition with fresh
    process noise, reweight by the measurement likelihood, renormalize in
    log space, and resample systematically when ESS < n/2.
    """
    n_particles = cloud.n_particles
    theta_new = _jitter(cloud, model, schedule, t, rng)
    log_w = cloud.log_weights.copy()

    if model.param_constraint is not None and model.param_dim:
        bad = ~np.asarray(model.param_constraint(theta_new), dtype=bool)
        if bad.any():
            theta_new[bad] = cloud.theta[bad]  # keep finite values for propagation
            log_w[bad] = -np.inf

    noise = rng.standard_normal((n_particles, model.state_dim)) @ model.process_noise.chol(t - 1).T
    drift = np.asarray(model.transition_mean(cloud.x, theta_new, t - 1))
    x_new = drift.reshape(n_particles, model.state_dim) + np.atleast_1d(u) + noise

    finite = np.isfinite(x_new).all(axis=1)
    if not finite.all():
        x_new[~finite] = 0.0
        log_w[~finite] = -np.inf

    g = np.asarray(model.measurement_mean(x_new, theta_new, t)).reshape(n_particles, model.meas_dim)
    log_like = gaussian_logpdf(np.atleast_1d(y) - g, model.meas_noise, t - 1)
    log_like = np.where(np.isfinite(log_like), log_like, -np.inf)
    log_w = log_w + log_like

    norm = logsumexp(log_w)
    if not np.isfinite(norm):
        raise DegeneracyError(f"all particle weights vanished at t={t}")
    log_w = log_w - norm

    new_cloud = ParticleCloud(x=x_new, theta=theta_new, log_weights=log_w, t=t)
    new_cloud.ess_at_weighting = new_cloud.ess
    if new_cloud.ess < n_particles / 2.0:
        new_cloud = resample_systematic(new_cloud, rng)
    return new_cloud


@dataclass
class IdentifyResult:
    """Per-step posterior parameter means with filter diagnostics."""

    estimates: Array
    ess: Array
    resampled: Array
    n_particles: int
    schedule: AdaSchedule
    seed: Optional[int] = None

    @property
    def horizon(self) -> int:
        return self.estimates.shape[0]


def identify(
    model: SsmModel,
    measurements: Array,
    inputs: Array,
    n_particles: int,
    schedule: Optional[AdaSchedule] = None,
    seed: int = 0,
    stream: tuple = (),
    rng: Optional[np.random.Generator] = None,
) -> IdentifyResult:
    """Run the filter over y_{1:T} and record the parameter mean at each step.

    Deterministic for fixed inputs and seed: the generator is the substream
    keyed by (seed, identify-stream, *stream) unless an explicit ``rng`` is
    given.
    """
    schedule = schedule or AdaSchedule()
    measurements = np.asarray(measurements, dtype=float).reshape(-1, model.meas_dim)
    horizon = measurements.shape[0]
    inputs = np.asarray(inputs, dtype=float).reshape(-1, model.state_dim)
    if horizon and inputs.shape[0] < horizon:
        raise ConfigurationError("input signal shorter than measurement record")

    gen = rng if rng is not None else rngmod.substream(seed, rngmod.STREAM_IDENTIFY, *stream)
    estimates = np.empty((horizon, model.param_dim))
    ess = np.empty(horizon)
    resampled = np.zeros(horizon, dtype=bool)
    if horizon == 0:
        return IdentifyResult(estimates, ess, resampled, n_particles, schedule, seed)

    cloud = init_cloud(model, n_particles, gen)
    for k in range(horizon):
        cloud = ada_step(cloud, measurements[k], inputs[k], model, schedule, k + 1, gen)
        estimates[k] = posterior_mean(cloud)
        ess[k] = cloud.ess_at_weighting
        resampled[k] = cloud.resampled
    return IdentifyResult(estimates, ess, resampled, n_particles, schedule, seed)
