"""MSE, bias, and efficiency auditing of identifier output against the bound.

The MSE matrix is the plain Monte-Carlo average of error outer products over
independent runs.  Conditional bias compares each run's estimate against a
high-fidelity reference posterior mean; the unconditional bias is the average
of the conditional ones over runs.  Classification applies per-parameter
tolerance tests: a run fraction within eps for conditional bias, an absolute
bound alpha on the mean bias, with efficiency requiring the eps test to pass
for every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pcrlbench import rng as rngmod
from pcrlbench.models import SsmModel
from pcrlbench.pcrlb import BoundSeries
from pcrlbench.smc import AdaSchedule, identify

Array = np.ndarray


@dataclass
class MseSeries:
    """Per-step q x q Monte-Carlo MSE matrices over M runs (t = 1..T)."""

    times: Array
    matrices: Array  # (T, q, q)
    mc_count: int

    @property
    def traces(self) -> Array:
        return np.einsum("tii->t", self.matrices)

    @property
    def diagonals(self) -> Array:
        return np.einsum("tii->ti", self.matrices)


def mse_mc(truths: Array, estimates: Array) -> MseSeries:
    """Average error outer products: truths (M, q), estimates (M, T, q)."""
    truths = np.asarray(truths, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if truths.ndim != 2 or estimates.ndim != 3 or truths.shape[0] != estimates.shape[0] \
            or truths.shape[1] != estimates.shape[2]:
        raise ValueError(f"shape mismatch: truths {truths.shape}, estimates {estimates.shape}")
    errors = truths[:, None, :] - estimates  # (M, T, q)
    products = np.einsum("mti,mtj->mtij", errors, errors)
    # Canonical per-entry summation order makes the reduction exactly
    # invariant to run permutations.
    products.sort(axis=0)
    mats = products.sum(axis=0) / truths.shape[0]
    horizon = estimates.shape[1]
    return MseSeries(times=np.arange(1, horizon + 1), matrices=mats, mc_count=truths.shape[0])


@dataclass
class ReferenceMean:
    """Reference posterior-mean sequence (row 0 is the prior mean)."""

    values: Array  # (T+1, q)
    provenance: dict


def reference_posterior_mean(
    model: SsmModel,
    measurements: Array,
    inputs: Array,
    n_ref: int,
    seed: int = 0,
    replicates: int = 5,
    schedule: Optional[AdaSchedule] = None,
    stream: tuple = (),
) -> ReferenceMean:
    """High-fidelity estimate of the true posterior parameter mean.

    Averages ``replicates`` independent filter runs with ``n_ref`` particles
    each.  Used as the oracle against which conditional bias is measured.
    """
    measurements = np.asarray(measurements, dtype=float).reshape(-1, model.meas_dim)
    horizon = measurements.shape[0]
    prior_theta = model.prior_mean[model.state_dim:]
    values = np.empty((horizon + 1, model.param_dim))
    values[0] = prior_theta
    if horizon:
        runs = [
            identify(
                model, measurements, inputs, n_ref,
                schedule=schedule, seed=seed,
                stream=(rngmod.STREAM_REFERENCE,) + stream + (r,),
            ).estimates
            for r in range(replicates)
        ]
        values[1:] = np.mean(runs, axis=0)
    return ReferenceMean(
        values=values,
        provenance={"n_ref": n_ref, "replicates": replicates, "seed": seed},
    )


def conditional_bias(reference: Array, estimate: Array) -> Array:
    """Reference mean minus delivered estimate, elementwise per step."""
    reference = np.asarray(reference, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if reference.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {estimate.shape}")
    return reference - estimate


@dataclass
class BiasRecord:
    """Per-run conditional biases and their across-run mean.

    ``conditional`` has shape (M, T, q); ``mean`` is its exact arithmetic
    average over runs.
    """

    times: Array
    conditional: Array
    provenance: dict = field(default_factory=dict)

    @property
    def mean(self) -> Array:
        return self.conditional.mean(axis=0)


@dataclass
class ConjugateToy:
    """Direct observation of one static Gaussian parameter: y_t = theta + w_t.

    The posterior after t observations is Gaussian with closed-form moments,
    which makes the MSE decomposition checkable exactly.
    """

    prior_mean: float = 0.5
    prior_var: float = 0.09
    noise_var: float = 0.04
    horizon: int = 20

    def posterior(self, ys: Array):
        """Posterior (mean, var) sequences for t = 1..T given draws (M, T)."""
        ys = np.asarray(ys, dtype=float)
        t_idx = np.arange(1, self.horizon + 1)
        post_var = 1.0 / (1.0 / self.prior_var + t_idx / self.noise_var)
        cumsum = np.cumsum(ys, axis=1)
        post_mean = post_var * (self.prior_mean / self.prior_var + cumsum / self.noise_var)
        return post_mean, post_var

    def simulate(self, m_count: int, rng: np.random.Generator):
        thetas = self.prior_mean + np.sqrt(self.prior_var) * rng.standard_normal(m_count)
        ys = thetas[:, None] + np.sqrt(self.noise_var) * rng.standard_normal((m_count, self.horizon))
        return thetas, ys


@dataclass
class DecompositionResult:
    times: Array
    residual: Array     # | P_mc - (mean V* + mean B* B*^T) | per step
    stderr: Array       # MC standard error of the MSE estimate per step
    mse: Array
    variance_term: Array
    bias_term: Array


def decomposition_check(
    toy: ConjugateToy,
    m_count: int,
    rng: np.random.Generator,
    offset: float = 0.1,
) -> DecompositionResult:
    """Check the MSE split into posterior variance plus squared bias.

    Simulates ``m_count`` records of the toy, uses the closed-form posterior
    mean shifted by ``offset`` as the estimator, and compares the Monte-Carlo
    MSE with the sum of the exact variance term and the bias outer product.
    The residual is pure MC noise and shrinks like 1/sqrt(M).
    """
    thetas, ys = toy.simulate(m_count, rng)
    post_mean, post_var = toy.posterior(ys)
    estimates = post_mean + offset
    errors = thetas[:, None] - estimates  # (M, T)
    sq = errors**2
    mse = sq.mean(axis=0)
    stderr = sq.std(axis=0, ddof=1) / np.sqrt(m_count)
    bias = post_mean - estimates          # B* per run: exactly -offset
    bias_term = (bias**2).mean(axis=0)
    variance_term = post_var               # E[V*] is deterministic here
    residual = np.abs(mse - (variance_term + bias_term))
    return DecompositionResult(
        times=np.arange(1, toy.horizon + 1),
        residual=residual,
        stderr=stderr,
        mse=mse,
        variance_term=variance_term,
        bias_term=bias_term,
    )


@dataclass
class Verdict:
    """Per-step classification flags and the diagnostics behind them."""

    times: Array
    frac_within_eps: Array      # (T, q)
    eps_unbiased: Array         # (T, q) bool
    eps_mmse: Array             # (T, q) bool, tied to eps_unbiased
    alpha_unbiased: Array       # (T, q) bool
    eps_efficient: Array        # (T,) bool: eps test passes for all parameters
    mean_bias: Array            # (T, q) signed
    trace_gap: Array            # (T,) trace of (MSE - bound)
    min_eig_gap: Array          # (T,)
    mse_diag: Array             # (T, q)
    bound_diag: Array           # (T, q)
    epsilon: Array
    alpha: Array
    rho: float

    def negative_gap_steps(self) -> Array:
        return self.times[self.min_eig_gap < 0.0]


def _align_bound(bound: BoundSeries, times: Array) -> Array:
    idx = np.searchsorted(bound.times, times)
    if np.any(idx >= bound.times.size) or np.any(bound.times[idx] != times):
        raise ValueError("bound series does not cover the MSE time range")
    return idx


def classify(
    mse: MseSeries,
    bound: BoundSeries,
    biases: BiasRecord,
    epsilon: Array,
    alpha: Array,
    rho: float = 0.7,
) -> Verdict:
    """Apply the tolerance tests and assemble the verdict.

    Per step and parameter: the eps flag needs a run fraction >= rho with
    |conditional bias| <= eps; the alpha flag needs |mean bias| <= alpha.
    When every run is within eps (strict conditional unbiasedness at the
    working tolerance) the alpha flag is set as well, since exact conditional
    unbiasedness implies unconditional unbiasedness.  Efficiency at a step
    requires the eps flag for all parameters.
    """
    epsilon = np.asarray(epsilon, dtype=float).reshape(-1)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    q = mse.matrices.shape[1]
    if epsilon.size == 1:
        epsilon = np.full(q, epsilon[0])
    if alpha.size == 1:
        alpha = np.full(q, alpha[0])

    if not np.array_equal(mse.times, biases.times):
        raise ValueError("MSE and bias series are not aligned")
    idx = _align_bound(bound, mse.times)
    bound_mats = np.array([bound.matrices[i] for i in idx])

    within = np.abs(biases.conditional) <= epsilon  # (M, T, q)
    frac = within.mean(axis=0)                      # (T, q)
    all_within = within.all(axis=0)
    eps_unbiased = frac >= rho
    mean_bias = biases.mean
    alpha_unbiased = (np.abs(mean_bias) <= alpha) | all_within
    eps_efficient = eps_unbiased.all(axis=1)

    gap = mse.matrices - bound_mats
    gap = 0.5 * (gap + np.transpose(gap, (0, 2, 1)))
    trace_gap = np.einsum("tii->t", gap)
    min_eig = np.array([np.linalg.eigvalsh(g)[0] if q else 0.0 for g in gap])

    return Verdict(
        times=mse.times,
        frac_within_eps=frac,
        eps_unbiased=eps_unbiased,
        eps_mmse=eps_unbiased.copy(),
        alpha_unbiased=alpha_unbiased,
        eps_efficient=eps_efficient,
        mean_bias=mean_bias,
        trace_gap=trace_gap,
        min_eig_gap=min_eig,
        mse_diag=mse.diagonals,
        bound_diag=np.array([np.diag(m) for m in bound_mats]),
        epsilon=epsilon,
        alpha=alpha,
        rho=rho,
    )


def psd_gap(mse: MseSeries, bound: BoundSeries):
    """Per-step (trace gap, minimum eigenvalue) of MSE minus bound.

    A negative minimum eigenvalue is a finite-sample artifact worth
    surfacing, not an error; values are reported unclipped.
    """
    idx = _align_bound(bound, mse.times)
    bound_mats = np.array([bound.matrices[i] for i in idx])
    gap = mse.matrices - bound_mats
    gap = 0.5 * (gap + np.transpose(gap, (0, 2, 1)))
    trace_gap = np.einsum("tii->t", gap)
    min_eig = np.array([np.linalg.eigvalsh(g)[0] for g in gap])
    return trace_gap, min_eig
