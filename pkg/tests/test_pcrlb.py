"""Bound-engine tests: initial information, H blocks, recursion, Schur bound."""

import numpy as np
import pytest

from pcrlbench import (
    NumericalError,
    build_model,
    estimate_h_blocks,
    extract_param_bound,
    initial_pim,
    pim_step,
    run_pcrlb,
    simulate_ensemble,
)
from pcrlbench.derivatives import fd_hessian
from pcrlbench.kalman import kalman_filter_1d
from pcrlbench.models import CovSchedule, InputSpec, SsmModel
from pcrlbench.pcrlb import HBlocks, PimState


def make_theta_blind_model():
    """q=2 model whose maps ignore the parameters entirely."""
    return SsmModel(
        name="theta-blind",
        state_dim=1,
        param_dim=2,
        meas_dim=1,
        transition_mean=lambda x, th, t: 0.9 * x,
        measurement_mean=lambda x, th, t: 1.1 * x,
        process_noise=CovSchedule(0.05, 1),
        meas_noise=CovSchedule(0.04, 1),
        prior_mean=np.array([0.0, 1.0, -1.0]),
        prior_cov=np.eye(3) * 0.5,
        input_spec=InputSpec(kind="zero"),
    )


class TestInitialPim:
    def test_diagonal_prior(self):
        j0 = initial_pim(np.zeros(5), np.diag([0.01] * 5), state_dim=1)
        assert np.allclose(j0.jx, [[100.0]])
        assert np.allclose(j0.jtheta, np.eye(4) * 100.0)
        assert np.allclose(j0.jxtheta, 0.0)

    def test_scaling(self):
        cov = np.diag([0.2, 0.4, 0.8])
        a = initial_pim(np.zeros(3), cov, 1)
        b = initial_pim(np.zeros(3), 4.0 * cov, 1)
        assert np.allclose(a.jz, 4.0 * b.jz)

    def test_matches_mc_average_of_fd_hessians(self):
        # Independent oracle: average finite-difference Hessians of the log
        # prior over draws; Gaussian information is the inverse covariance.
        rng = np.random.default_rng(4)
        cov = np.diag([0.01, 0.02, 0.05])
        mean = np.array([1.0, 0.5, -0.5])
        inv = np.linalg.inv(cov)

        def logp(z):
            r = z - mean
            return -0.5 * float(r @ inv @ r)

        draws = rng.multivariate_normal(mean, cov, size=10_000)
        acc = np.zeros((3, 3))
        for z in draws:
            acc += -fd_hessian(logp, z)
        mc = acc / draws.shape[0]
        closed = initial_pim(mean, cov, 1)
        assert np.allclose(mc, closed.jz, rtol=0.02, atol=1e-4)

    def test_singular_prior_raises(self):
        with pytest.raises(NumericalError):
            initial_pim(np.zeros(2), np.zeros((2, 2)), 1)


class TestHBlocks:
    def test_linear_gaussian_exact(self):
        a, c, q_var, r_var = 0.8, 1.0, 0.1, 0.1
        model = build_model("linear-gaussian-1d", {"a": a, "c": c, "q_var": q_var, "r_var": r_var})
        ens = simulate_ensemble(model, 50, 2, seed=0)
        for use_fd in (False, True):
            h = estimate_h_blocks(model, ens, 0, use_fd=use_fd)
            assert h.h11[0, 0] == pytest.approx(a**2 / q_var, rel=1e-7)
            assert h.h13[0, 0] == pytest.approx(-a / q_var, rel=1e-7)
            assert h.h33[0, 0] == pytest.approx(1 / q_var + c**2 / r_var, rel=1e-7)

    def test_theta_independent_model_has_zero_cross_blocks(self):
        model = make_theta_blind_model()
        ens = simulate_ensemble(model, 30, 2, seed=1)
        h = estimate_h_blocks(model, ens, 0, use_fd=True)
        assert np.allclose(h.h12, 0.0, atol=1e-9)
        assert np.allclose(h.h22, 0.0, atol=1e-9)
        assert np.allclose(h.h23, 0.0, atol=1e-9)

    def test_dual_path_agreement_on_benchmark(self):
        model = build_model("benchmark-eq13")
        ens = simulate_ensemble(model, 10_000, 2, seed=2)
        ha = estimate_h_blocks(model, ens, 0, use_fd=False)
        hf = estimate_h_blocks(model, ens, 0, use_fd=True)
        for name in ("h11", "h12", "h13", "h22", "h23", "h33"):
            a_blk, f_blk = getattr(ha, name), getattr(hf, name)
            scale = np.abs(a_blk).max()
            assert np.allclose(a_blk, f_blk, rtol=0.01, atol=1e-8 * max(scale, 1.0)), name

    def test_mc_standard_error_scales_with_sqrt_m(self):
        model = build_model("benchmark-eq13")
        m0 = 150
        entries = {m: [] for m in (m0, 4 * m0)}
        for rep in range(20):
            for m_count in (m0, 4 * m0):
                ens = simulate_ensemble(model, m_count, 2, seed=1000 + rep * 10 + m_count)
                h = estimate_h_blocks(model, ens, 0)
                entries[m_count].append(h.h11[0, 0])
        ratio = np.std(entries[4 * m0]) / np.std(entries[m0])
        assert 0.5 / 1.5 <= ratio <= 0.5 * 1.5


class TestPimStep:
    def test_decoupled_update(self):
        j = initial_pim(np.zeros(3), np.eye(3) * 0.5, state_dim=1)
        h = HBlocks(
            h11=np.array([[3.0]]),
            h12=np.zeros((1, 2)),
            h13=np.zeros((1, 1)),
            h22=np.array([[1.0, 0.2], [0.2, 2.0]]),
            h23=np.array([[0.3], [0.1]]),
            h33=np.array([[5.0]]),
            t=0,
            mc_count=1,
        )
        out = pim_step(j, h)
        assert np.allclose(out.jx, h.h33)
        assert np.allclose(out.jxtheta, h.h23.T)
        assert np.allclose(out.jtheta, j.jtheta + h.h22)

    def test_zero_blocks_preserve_parameter_information(self):
        j = initial_pim(np.zeros(3), np.eye(3) * 0.25, state_dim=1)
        zero = HBlocks(
            h11=np.zeros((1, 1)), h12=np.zeros((1, 2)), h13=np.zeros((1, 1)),
            h22=np.zeros((2, 2)), h23=np.zeros((2, 1)), h33=np.zeros((1, 1)),
            t=0, mc_count=1,
        )
        out = pim_step(j, zero)
        assert np.allclose(out.jx, 0.0)
        assert np.allclose(out.jtheta, j.jtheta)

    def test_kalman_oracle_short(self):
        model = build_model("linear-gaussian-1d")
        res = run_pcrlb(model, 20, 30, seed=3)
        ys = res.ensemble.measurements[0, :, 0]
        _, variances = kalman_filter_1d(0.8, 1.0, 0.1, 0.1, 0.0, 1.0, ys)
        jx_inv = np.array([1.0 / p.jx[0, 0] for p in res.pims])
        assert np.allclose(jx_inv, variances, rtol=1e-10)

    def test_monotone_parameter_information_without_cross_blocks(self):
        rng = np.random.default_rng(6)
        j = initial_pim(np.zeros(3), np.eye(3) * 0.5, state_dim=1)
        for t in range(10):
            raw = rng.standard_normal((2, 2))
            h = HBlocks(
                h11=np.array([[1.0]]), h12=np.zeros((1, 2)), h13=np.zeros((1, 1)),
                h22=raw @ raw.T, h23=np.zeros((2, 1)), h33=np.array([[2.0]]),
                t=t, mc_count=1,
            )
            out = pim_step(j, h)
            assert np.linalg.eigvalsh(out.jtheta - j.jtheta).min() >= -1e-12
            j = out

    def test_regularization_recovers_singular_update(self):
        j = PimState(jx=np.array([[0.0]]), jxtheta=np.zeros((1, 0)), jtheta=np.zeros((0, 0)), t=0)
        h = HBlocks(
            h11=np.zeros((1, 1)), h12=np.zeros((1, 0)), h13=np.array([[1.0]]),
            h22=np.zeros((0, 0)), h23=np.zeros((0, 1)), h33=np.array([[4.0]]),
            t=0, mc_count=1,
        )
        events = []
        out = pim_step(j, h, events)
        assert events, "expected a regularization event"
        assert np.isfinite(out.jx).all()

    def test_irrecoverable_singularity_raises_with_condition_number(self):
        j = PimState(jx=np.array([[-5.0]]), jxtheta=np.zeros((1, 0)), jtheta=np.zeros((0, 0)), t=0)
        h = HBlocks(
            h11=np.zeros((1, 1)), h12=np.zeros((1, 0)), h13=np.array([[1.0]]),
            h22=np.zeros((0, 0)), h23=np.zeros((0, 1)), h33=np.array([[4.0]]),
            t=0, mc_count=1,
        )
        with pytest.raises(NumericalError, match="condition number"):
            pim_step(j, h, [])


class TestExtractParamBound:
    def test_block_diagonal_case(self):
        j = PimState(
            jx=np.array([[2.0]]),
            jxtheta=np.zeros((1, 2)),
            jtheta=np.array([[4.0, 0.0], [0.0, 8.0]]),
            t=0,
        )
        assert np.allclose(extract_param_bound(j), np.diag([0.25, 0.125]))

    def test_matches_full_inverse_block(self):
        rng = np.random.default_rng(7)
        raw = rng.standard_normal((6, 6))
        jz = raw @ raw.T + 6.0 * np.eye(6)
        n, q = 2, 4
        j = PimState(jx=jz[:n, :n], jxtheta=jz[:n, n:], jtheta=jz[n:, n:], t=0)
        lower_right = np.linalg.inv(jz)[n:, n:]
        assert np.allclose(extract_param_bound(j), lower_right, rtol=1e-10, atol=1e-14)

    def test_hand_computed_schur(self):
        j = PimState(
            jx=np.array([[4.0]]),
            jxtheta=np.array([[2.0, 0.0]]),
            jtheta=np.diag([2.0, 1.0]),
            t=0,
        )
        assert np.allclose(extract_param_bound(j), np.eye(2))

    def test_q_zero_returns_empty(self):
        j = PimState(jx=np.eye(1), jxtheta=np.zeros((1, 0)), jtheta=np.zeros((0, 0)), t=0)
        assert extract_param_bound(j).shape == (0, 0)


class TestRunPcrlb:
    def test_single_trajectory_run_is_finite(self):
        model = build_model("benchmark-eq13")
        res = run_pcrlb(model, 1, 10, seed=8)
        assert np.isfinite(res.bound.diagonals).all()

    def test_deterministic_under_seed(self):
        model = build_model("benchmark-eq13")
        a = run_pcrlb(model, 25, 15, seed=9)
        b = run_pcrlb(model, 25, 15, seed=9)
        assert np.array_equal(a.bound.diagonals, b.bound.diagonals)

    def test_pim_states_positive_definite_on_benchmark(self):
        model = build_model("benchmark-eq13")
        res = run_pcrlb(model, 100, 40, seed=10)
        assert all(p.is_positive_definite() for p in res.pims)

    def test_symmetry_enforced(self):
        model = build_model("benchmark-eq13")
        res = run_pcrlb(model, 50, 20, seed=11)
        for p in res.pims:
            assert np.max(np.abs(p.jx - p.jx.T)) == 0.0
            assert np.max(np.abs(p.jtheta - p.jtheta.T)) == 0.0
        for mat in res.bound.matrices:
            assert np.max(np.abs(mat - mat.T)) == 0.0
