"""Stochastic state-space models with additive Gaussian noise.

The model class covered here is

    x[t+1] = f(x[t], theta) + u[t] + v[t],   v[t] ~ N(0, Q[t])
    y[t]   = g(x[t], theta) + w[t],          w[t] ~ N(0, R[t])

with a static parameter vector theta and a Gaussian prior over the extended
state z = [x; theta].  Mean maps are batched: ``f(x, theta, t)`` accepts
arrays of shape (..., n) and (..., q) and broadcasts.

Time indexing convention used throughout the package (0-based arrays):
``states[t]`` is x_t for t = 0..T; ``measurements[k]`` is y_{k+1};
``inputs[k]`` is the input driving x_k -> x_{k+1}; ``Q(t)`` is the process
noise entering x_{t+1}; ``R(t)`` is the noise on y_t (t >= 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from pcrlbench import rng as rngmod

Array = np.ndarray


class ConfigurationError(ValueError):
    """Invalid model or run configuration (e.g. non-PD covariance)."""


class ModelEvaluationError(RuntimeError):
    """A model map produced NaN/Inf on inputs that should be valid."""


class NumericalError(RuntimeError):
    """Irrecoverable numerical failure (singularity, bound breakdown)."""


class DegeneracyError(RuntimeError):
    """All particle weights collapsed to zero."""


def _as_cov(values, dim: int) -> Array:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 2 and arr.shape == (dim, dim):
        return arr
    if arr.ndim == 3 and arr.shape[1:] == (dim, dim):
        return arr
    raise ConfigurationError(f"covariance shape {arr.shape} does not match dimension {dim}")


class CovSchedule:
    """Per-step covariance sequence; a constant matrix broadcasts to all steps.

    Cholesky factors, inverses and log-determinants are cached per distinct
    step, so the constant case pays the factorization once.
    """

    def __init__(self, values, dim: int):
        self.dim = dim
        self._values = _as_cov(values, dim)
        self.constant = self._values.ndim == 2
        self._cache: dict = {}
        # Fail fast on non-PD input.
        mats = self._values[None] if self.constant else self._values
        for k, mat in enumerate(mats):
            if not np.allclose(mat, mat.T):
                raise ConfigurationError(f"covariance at step {k} is not symmetric")
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise ConfigurationError(f"covariance at step {k} is not positive definite") from None

    def cov(self, t: int) -> Array:
        return self._values if self.constant else self._values[t]

    def _entry(self, t: int):
        key = None if self.constant else t
        hit = self._cache.get(key)
        if hit is None:
            mat = self.cov(t)
            chol = np.linalg.cholesky(mat)
            inv = np.linalg.inv(mat)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            hit = (chol, inv, logdet)
            self._cache[key] = hit
        return hit

    def chol(self, t: int) -> Array:
        return self._entry(t)[0]

    def inv(self, t: int) -> Array:
        return self._entry(t)[1]

    def logdet(self, t: int) -> float:
        return self._entry(t)[2]


def gaussian_logpdf(resid: Array, schedule: CovSchedule, t: int) -> Array:
    """Log N(resid; 0, cov(t)) for residuals of shape (..., dim)."""
    inv = schedule.inv(t)
    quad = np.einsum("...i,ij,...j->...", resid, inv, resid)
    return -0.5 * (schedule.dim * np.log(2.0 * np.pi) + schedule.logdet(t) + quad)


@dataclass(frozen=True)
class ExtendedState:
    """Concatenated state/parameter point z = [x; theta]."""

    x: Array
    theta: Array

    @property
    def z(self) -> Array:
        return np.concatenate([np.atleast_1d(self.x), np.atleast_1d(self.theta)])

    @classmethod
    def from_z(cls, z: Array, state_dim: int) -> "ExtendedState":
        z = np.asarray(z, dtype=float)
        return cls(z[:state_dim].copy(), z[state_dim:].copy())


@dataclass(frozen=True)
class MapDerivatives:
    """First and second derivatives of one output map h(x, theta).

    ``jac_x[k, i] = dh_k/dx_i``, ``hess_xx[k, i, j] = d2h_k/dx_i dx_j`` and so
    on; leading axis runs over output components.
    """

    jac_x: Array
    jac_theta: Array
    hess_xx: Array
    hess_xtheta: Array
    hess_thetatheta: Array


@dataclass(frozen=True)
class InputSpec:
    """Declarative input signal: all-zero, random binary, or explicit values."""

    kind: str = "zero"
    amplitude: float = 0.5
    seed: int = 7
    values: Optional[Array] = None

    def build(self, horizon: int, dim: int) -> Array:
        if self.kind == "zero":
            return np.zeros((horizon, dim))
        if self.kind == "prbs":
            gen = rngmod.substream(self.seed, rngmod.STREAM_INPUT)
            signs = gen.integers(0, 2, size=(horizon, dim)) * 2 - 1
            return self.amplitude * signs.astype(float)
        if self.kind == "custom":
            if self.values is None:
                raise ConfigurationError("custom input spec requires values")
            vals = np.asarray(self.values, dtype=float).reshape(-1, dim)
            if vals.shape[0] < horizon:
                raise ConfigurationError(
                    f"custom input has {vals.shape[0]} steps, horizon needs {horizon}"
                )
            return vals[:horizon].copy()
        raise ConfigurationError(f"unknown input kind {self.kind!r}")


@dataclass
class SsmModel:
    """System description: mean maps, noise laws, prior, and optional
    analytic derivatives of the mean maps.

    ``transition_mean(x, theta, t)`` and ``measurement_mean(x, theta, t)``
    must broadcast over leading axes.  Derivative callables, when supplied,
    are evaluated point-wise on (n,) / (q,) vectors and enable the fast
    analytic path in the bound engine; otherwise finite differences are used.
    """

    name: str
    state_dim: int
    param_dim: int
    meas_dim: int
    transition_mean: Callable[[Array, Array, int], Array]
    measurement_mean: Callable[[Array, Array, int], Array]
    process_noise: CovSchedule
    meas_noise: CovSchedule
    prior_mean: Array
    prior_cov: Array
    input_spec: InputSpec = field(default_factory=InputSpec)
    transition_derivs: Optional[Callable[[Array, Array, int], MapDerivatives]] = None
    measurement_derivs: Optional[Callable[[Array, Array, int], MapDerivatives]] = None
    param_constraint: Optional[Callable[[Array], Array]] = None

    def __post_init__(self):
        for dim_name in ("state_dim", "param_dim", "meas_dim"):
            if getattr(self, dim_name) < 0 or (dim_name != "param_dim" and getattr(self, dim_name) == 0):
                raise ConfigurationError(f"{dim_name} must be positive")
        self.prior_mean = np.asarray(self.prior_mean, dtype=float).reshape(-1)
        self.prior_cov = np.asarray(self.prior_cov, dtype=float)
        s = self.extended_dim
        if self.prior_mean.shape != (s,) or self.prior_cov.shape != (s, s):
            raise ConfigurationError(
                f"prior shapes {self.prior_mean.shape}/{self.prior_cov.shape} "
                f"do not match extended dimension {s}"
            )
        try:
            np.linalg.cholesky(self.prior_cov)
        except np.linalg.LinAlgError:
            raise ConfigurationError("prior covariance is not positive definite") from None
        if self.process_noise.dim != self.state_dim:
            raise ConfigurationError("process noise dimension mismatch")
        if self.meas_noise.dim != self.meas_dim:
            raise ConfigurationError("measurement noise dimension mismatch")

    @property
    def extended_dim(self) -> int:
        return self.state_dim + self.param_dim

    def Q(self, t: int) -> Array:
        """Process noise covariance entering x_{t+1}."""
        return self.process_noise.cov(t)

    def R(self, t: int) -> Array:
        """Measurement noise covariance on y_t (t >= 1)."""
        return self.meas_noise.cov(t - 1)

    def inputs(self, horizon: int) -> Array:
        return self.input_spec.build(horizon, self.state_dim)

    def split_prior(self):
        """Prior mean/cov blocks for (x, theta)."""
        n = self.state_dim
        return (
            self.prior_mean[:n],
            self.prior_mean[n:],
            self.prior_cov[:n, :n],
            self.prior_cov[n:, n:],
        )


@dataclass
class TrajectoryEnsemble:
    """M simulated trajectories over horizon T, plus the shared input signal.

    Shapes: ``states`` (M, T+1, n); ``params`` (M, q), constant per
    trajectory; ``measurements`` (M, T, m) with row k holding y_{k+1};
    ``inputs`` (T, n).
    """

    states: Array
    params: Array
    measurements: Array
    inputs: Array
    seed: int
    model_name: str = ""

    @property
    def count(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1] - 1


def sample_prior(model: SsmModel, count: int, rng: np.random.Generator) -> list[ExtendedState]:
    """Draw ``count`` i.i.d. extended states from the model prior."""
    if count < 0:
        raise ConfigurationError("count must be >= 0")
    if count == 0:
        return []
    chol = np.linalg.cholesky(model.prior_cov)
    draws = model.prior_mean + rng.standard_normal((count, model.extended_dim)) @ chol.T
    n = model.state_dim
    return [ExtendedState(row[:n].copy(), row[n:].copy()) for row in draws]


def _check_finite(out: Array, what: str, t: int, context) -> Array:
    if not np.all(np.isfinite(out)):
        raise ModelEvaluationError(f"{what} produced non-finite output at t={t}: {context}")
    return out


def step_state(model: SsmModel, z: ExtendedState, u: Array, v: Array, t: int) -> Array:
    """One transition x_{t+1} = f(x, theta) + u + v."""
    out = np.atleast_1d(model.transition_mean(z.x, z.theta, t)) + np.atleast_1d(u) + np.atleast_1d(v)
    return _check_finite(out, "transition", t, z)


def step_measurement(model: SsmModel, z: ExtendedState, w: Array, t: int) -> Array:
    """One measurement y_t = g(x, theta) + w."""
    out = np.atleast_1d(model.measurement_mean(z.x, z.theta, t)) + np.atleast_1d(w)
    return _check_finite(out, "measurement", t, z)


def log_transition_density(model: SsmModel, x_next: Array, z: ExtendedState, u: Array, t: int) -> float:
    """log p(x_{t+1} | x_t, theta): Gaussian density of the implied noise."""
    mean = np.atleast_1d(model.transition_mean(z.x, z.theta, t)) + np.atleast_1d(u)
    resid = np.atleast_1d(x_next) - mean
    return float(gaussian_logpdf(resid, model.process_noise, t))


def log_measurement_density(model: SsmModel, y: Array, z: ExtendedState, t: int) -> float:
    """log p(y_t | x_t, theta): Gaussian density of the implied noise."""
    resid = np.atleast_1d(y) - np.atleast_1d(model.measurement_mean(z.x, z.theta, t))
    return float(gaussian_logpdf(resid, model.meas_noise, t - 1))


def simulate_ensemble(model: SsmModel, count: int, horizon: int, seed: int) -> TrajectoryEnsemble:
    """Simulate ``count`` independent trajectories of length ``horizon``.

    Each trajectory owns the RNG substream keyed by (seed, trajectory index),
    so the result is bit-identical regardless of evaluation order or worker
    count.  Parameters are drawn once per trajectory and held constant.
    """
    if count < 1 or horizon < 1:
        raise ConfigurationError("count and horizon must be >= 1")
    n, q, m = model.state_dim, model.param_dim, model.meas_dim
    inputs = model.inputs(horizon)

    z0 = np.empty((count, n + q))
    vs = np.empty((count, horizon, n))
    ws = np.empty((count, horizon, m))
    prior_chol = np.linalg.cholesky(model.prior_cov)
    for j in range(count):
        gen = rngmod.substream(seed, rngmod.STREAM_ENSEMBLE, j)
        z0[j] = model.prior_mean + prior_chol @ gen.standard_normal(n + q)
        vs[j] = gen.standard_normal((horizon, n))
        ws[j] = gen.standard_normal((horizon, m))

    states = np.empty((count, horizon + 1, n))
    measurements = np.empty((count, horizon, m))
    states[:, 0] = z0[:, :n]
    params = z0[:, n:]

    for t in range(horizon):
        drift = np.asarray(model.transition_mean(states[:, t], params, t)).reshape(count, n)
        x_next = drift + inputs[t] + vs[:, t] @ model.process_noise.chol(t).T
        if not np.all(np.isfinite(x_next)):
            bad = int(np.argwhere(~np.isfinite(x_next).all(axis=1))[0, 0])
            raise ModelEvaluationError(f"transition produced non-finite state: trajectory {bad}, t={t}")
        states[:, t + 1] = x_next
        g = np.asarray(model.measurement_mean(x_next, params, t + 1)).reshape(count, m)
        y = g + ws[:, t] @ model.meas_noise.chol(t).T
        if not np.all(np.isfinite(y)):
            bad = int(np.argwhere(~np.isfinite(y).all(axis=1))[0, 0])
            raise ModelEvaluationError(f"measurement produced non-finite output: trajectory {bad}, t={t + 1}")
        measurements[:, t] = y

    return TrajectoryEnsemble(
        states=states,
        params=params,
        measurements=measurements,
        inputs=inputs,
        seed=seed,
        model_name=model.name,
    )
