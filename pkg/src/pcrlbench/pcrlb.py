"""Recursive posterior information matrix and the parameter-block MSE bound.

The extended-state information matrix J_t is propagated by a block
recursion driven by six expectation blocks H11..H33, which are Monte-Carlo
averages of negative Hessian blocks of

    log p(x_{t+1} | x_t, theta) + log p(y_{t+1} | x_{t+1}, theta)

with respect to the stacked vector (x_t, theta, x_{t+1}).  The parameter
bound is the inverse Schur complement of the state block.

Hessian blocks come from model-supplied analytic derivatives when available,
otherwise from central finite differences of the log density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pcrlbench import derivatives as fd
from pcrlbench.models import (
    NumericalError,
    SsmModel,
    TrajectoryEnsemble,
    gaussian_logpdf,
    simulate_ensemble,
)

Array = np.ndarray

# Regularization ladder for Cholesky failures: lam, 100*lam, 10000*lam.
_REG_BASE = 1e-9
_REG_ESCALATIONS = 3


def _sym(a: Array) -> Array:
    return 0.5 * (a + a.T)


@dataclass
class RegularizationEvent:
    t: int
    where: str
    lam: float


def _chol_with_regularization(mat: Array, where: str, t: int, events: Optional[list]) -> Array:
    """Cholesky factor, adding lam*I on failure with x100 escalation."""
    mat = _sym(mat)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    n = mat.shape[0]
    lam = _REG_BASE * (1.0 + np.trace(mat) / max(n, 1))
    for _ in range(_REG_ESCALATIONS):
        try:
            chol = np.linalg.cholesky(mat + lam * np.eye(n))
        except np.linalg.LinAlgError:
            lam *= 100.0
            continue
        if events is not None:
            events.append(RegularizationEvent(t=t, where=where, lam=lam))
        return chol
    cond = float(np.linalg.cond(mat))
    raise NumericalError(f"{where} not positive definite at t={t} (condition number {cond:.3e})")


def _chol_solve(chol: Array, b: Array) -> Array:
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


def _chol_inverse(chol: Array) -> Array:
    return _chol_solve(chol, np.eye(chol.shape[0]))


@dataclass
class PimState:
    """Block information matrix over the extended state at one time step."""

    jx: Array
    jxtheta: Array
    jtheta: Array
    t: int

    @property
    def jz(self) -> Array:
        top = np.hstack([self.jx, self.jxtheta])
        bottom = np.hstack([self.jxtheta.T, self.jtheta])
        return _sym(np.vstack([top, bottom]))

    def is_positive_definite(self) -> bool:
        try:
            np.linalg.cholesky(self.jz)
            return True
        except np.linalg.LinAlgError:
            return False


@dataclass
class HBlocks:
    """Monte-Carlo averages of the six negative Hessian blocks at step t."""

    h11: Array
    h12: Array
    h13: Array
    h22: Array
    h23: Array
    h33: Array
    t: int
    mc_count: int


@dataclass
class BoundSeries:
    """Per-step parameter bound matrices with reporting extras."""

    times: Array
    matrices: list[Array]
    diagonals: Array
    cond_jx: Array
    reg_events: Array

    @property
    def horizon(self) -> int:
        return int(self.times[-1])

    def diag_at(self, t: int) -> Array:
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or self.times[idx] != t:
            raise KeyError(f"no bound stored for t={t}")
        return self.diagonals[idx]


def initial_pim(prior_mean: Array, prior_cov: Array, state_dim: int) -> PimState:
    """Information matrix of the Gaussian prior: inverse covariance, in blocks."""
    prior_cov = np.asarray(prior_cov, dtype=float)
    try:
        chol = np.linalg.cholesky(prior_cov)
    except np.linalg.LinAlgError:
        raise NumericalError("prior covariance is singular") from None
    j0 = _sym(_chol_inverse(chol))
    n = state_dim
    return PimState(jx=j0[:n, :n], jxtheta=j0[:n, n:], jtheta=j0[n:, n:], t=0)


def _analytic_blocks(model: SsmModel, x_t, theta, x_next, y_next, u_t, t):
    """Exact Hessian blocks for additive Gaussian noise from map derivatives."""
    qi = model.process_noise.inv(t)
    ri = model.meas_noise.inv(t)  # noise on y_{t+1}
    fd_f = model.transition_derivs(x_t, theta, t)
    fd_g = model.measurement_derivs(x_next, theta, t + 1)

    r = x_next - np.atleast_1d(model.transition_mean(x_t, theta, t)) - u_t
    e = y_next - np.atleast_1d(model.measurement_mean(x_next, theta, t + 1))
    qr = qi @ r
    re = ri @ e

    fx, ft = fd_f.jac_x, fd_f.jac_theta
    gx, gt = fd_g.jac_x, fd_g.jac_theta

    h11 = fx.T @ qi @ fx - np.einsum("k,kij->ij", qr, fd_f.hess_xx)
    h12 = fx.T @ qi @ ft - np.einsum("k,kij->ij", qr, fd_f.hess_xtheta)
    h13 = -fx.T @ qi
    h22 = (
        ft.T @ qi @ ft
        - np.einsum("k,kij->ij", qr, fd_f.hess_thetatheta)
        + gt.T @ ri @ gt
        - np.einsum("k,kij->ij", re, fd_g.hess_thetatheta)
    )
    h23 = -ft.T @ qi + gt.T @ ri @ gx - np.einsum("k,kji->ij", re, fd_g.hess_xtheta)
    h33 = qi + gx.T @ ri @ gx - np.einsum("k,kij->ij", re, fd_g.hess_xx)
    return h11, h12, h13, h22, h23, h33


def _fd_blocks(model: SsmModel, x_t, theta, x_next, y_next, u_t, t):
    """Hessian blocks by finite differences of the stacked log density."""
    n, q = model.state_dim, model.param_dim

    def logp(zeta: Array) -> float:
        xc = zeta[:n]
        th = zeta[n : n + q]
        xn = zeta[n + q :]
        r = xn - np.atleast_1d(model.transition_mean(xc, th, t)) - u_t
        e = y_next - np.atleast_1d(model.measurement_mean(xn, th, t + 1))
        return float(gaussian_logpdf(r, model.process_noise, t) + gaussian_logpdf(e, model.meas_noise, t))

    zeta0 = np.concatenate([x_t, theta, x_next])
    neg_hess = -fd.fd_hessian(logp, zeta0)
    h11 = neg_hess[:n, :n]
    h12 = neg_hess[:n, n : n + q]
    h13 = neg_hess[:n, n + q :]
    h22 = neg_hess[n : n + q, n : n + q]
    h23 = neg_hess[n : n + q, n + q :]
    h33 = neg_hess[n + q :, n + q :]
    return h11, h12, h13, h22, h23, h33


def estimate_h_blocks(
    model: SsmModel,
    ensemble: TrajectoryEnsemble,
    t: int,
    use_fd: bool = False,
) -> HBlocks:
    """Average the negative Hessian blocks over the ensemble at step t.

    Uses steps t and t+1 of the ensemble.  The reduction is a fixed-topology
    pairwise sum over the trajectory axis (numpy's ordering), so the result
    does not depend on how trajectories were produced or scheduled.
    """
    m_count = ensemble.count
    n, q = model.state_dim, model.param_dim
    analytic = (
        not use_fd and model.transition_derivs is not None and model.measurement_derivs is not None
    )
    shapes = [(n, n), (n, q), (n, n), (q, q), (q, n), (n, n)]
    stacks = [np.empty((m_count,) + s) for s in shapes]
    u_t = ensemble.inputs[t]

    for j in range(m_count):
        args = (
            model,
            ensemble.states[j, t],
            ensemble.params[j],
            ensemble.states[j, t + 1],
            ensemble.measurements[j, t],
            u_t,
            t,
        )
        blocks = _analytic_blocks(*args) if analytic else _fd_blocks(*args)
        for stack, block in zip(stacks, blocks):
            stack[j] = block

    names = ("H11", "H12", "H13", "H22", "H23", "H33")
    for name, stack in zip(names, stacks):
        finite = np.isfinite(stack).all(axis=tuple(range(1, stack.ndim)))
        if not finite.all():
            bad = int(np.argwhere(~finite)[0, 0])
            raise NumericalError(f"non-finite Hessian in block {name}, trajectory {bad}, t={t}")

    h11, h12, h13, h22, h23, h33 = (stack.mean(axis=0) for stack in stacks)
    return HBlocks(
        h11=_sym(h11), h12=h12, h13=h13, h22=_sym(h22), h23=h23, h33=_sym(h33),
        t=t, mc_count=m_count,
    )


def pim_step(J: PimState, H: HBlocks, events: Optional[list] = None) -> PimState:
    """One information-recursion step: J at time t plus H blocks -> J at t+1."""
    a_chol = _chol_with_regularization(J.jx + H.h11, "state information update", H.t, events)
    cross = J.jxtheta + H.h12
    a_inv_h13 = _chol_solve(a_chol, H.h13)
    a_inv_cross = _chol_solve(a_chol, cross)
    jx_next = _sym(H.h33 - H.h13.T @ a_inv_h13)
    jxtheta_next = H.h23.T - H.h13.T @ a_inv_cross
    jtheta_next = _sym(J.jtheta + H.h22 - cross.T @ a_inv_cross)
    return PimState(jx=jx_next, jxtheta=jxtheta_next, jtheta=jtheta_next, t=J.t + 1)


def extract_param_bound(J: PimState, events: Optional[list] = None) -> Array:
    """Parameter-block bound: inverse Schur complement of the state block.

    Equals the lower-right q x q block of the inverse of the full extended
    information matrix.
    """
    q = J.jtheta.shape[0]
    if q == 0:
        return np.zeros((0, 0))
    jx_chol = _chol_with_regularization(J.jx, "state information block", J.t, events)
    schur = _sym(J.jtheta - J.jxtheta.T @ _chol_solve(jx_chol, J.jxtheta))
    schur_chol = _chol_with_regularization(
        schur, "parameter Schur complement (bound breakdown; is the MC sample count sufficient?)",
        J.t, events,
    )
    return _sym(_chol_inverse(schur_chol))


@dataclass
class PcrlbResult:
    bound: BoundSeries
    pims: list[PimState]
    ensemble: TrajectoryEnsemble
    events: list[RegularizationEvent] = field(default_factory=list)


def run_pcrlb(
    model: SsmModel,
    mc_count: int,
    horizon: int,
    seed: int,
    use_fd: bool = False,
    ensemble: Optional[TrajectoryEnsemble] = None,
) -> PcrlbResult:
    """Simulate an ensemble and run the full bound recursion over it.

    Returns the bound series for t = 0..horizon (t = 0 is the prior bound)
    together with the information-matrix sequence and the ensemble used.
    Deterministic for fixed (model, mc_count, horizon, seed).
    """
    if ensemble is None:
        ensemble = simulate_ensemble(model, mc_count, horizon, seed)
    q = model.param_dim
    events: list[RegularizationEvent] = []
    reg_counts = np.zeros(horizon + 1, dtype=int)
    pims = [initial_pim(model.prior_mean, model.prior_cov, model.state_dim)]
    matrices = [extract_param_bound(pims[0], events)]
    cond_jx = [float(np.linalg.cond(pims[0].jx))]
    reg_counts[0] = len(events)
    for t in range(horizon):
        seen = len(events)
        h = estimate_h_blocks(model, ensemble, t, use_fd=use_fd)
        pims.append(pim_step(pims[-1], h, events))
        matrices.append(extract_param_bound(pims[-1], events))
        cond_jx.append(float(np.linalg.cond(pims[-1].jx)))
        reg_counts[t + 1] = len(events) - seen

    times = np.arange(horizon + 1)
    diagonals = np.array([np.diag(m) if q else np.zeros(0) for m in matrices])
    bound = BoundSeries(
        times=times,
        matrices=matrices,
        diagonals=diagonals,
        cond_jx=np.asarray(cond_jx),
        reg_events=reg_counts,
    )
    return PcrlbResult(bound=bound, pims=pims, ensemble=ensemble, events=events)
