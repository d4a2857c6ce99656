"""Particle-identifier tests: cloud init, resampling, stepping, full runs."""

import numpy as np
import pytest
from scipy.special import logsumexp

from pcrlbench import (
    AdaSchedule,
    ConfigurationError,
    DegeneracyError,
    ada_step,
    build_model,
    identify,
    init_cloud,
    posterior_mean,
    resample_systematic,
    simulate_ensemble,
)
from pcrlbench.kalman import kalman_filter_1d
from pcrlbench.smc import ParticleCloud


def cloud_from(thetas, weights, xs=None):
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim == 1:
        thetas = thetas[:, None]
    n = thetas.shape[0]
    xs = np.zeros((n, 1)) if xs is None else np.asarray(xs, dtype=float).reshape(n, -1)
    w = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(w / w.sum())
    return ParticleCloud(x=xs, theta=thetas, log_weights=log_w, t=0)


class TestInitCloud:
    def test_uniform_weights_and_ess(self):
        cloud = init_cloud(build_model("benchmark-eq13"), 4, np.random.default_rng(0))
        assert np.allclose(cloud.weights, 0.25)
        assert cloud.ess == pytest.approx(4.0)

    def test_prior_parameter_mean(self):
        cloud = init_cloud(build_model("benchmark-eq13"), 10_000, np.random.default_rng(1))
        mean = posterior_mean(cloud)
        assert np.all(np.abs(mean - [0.7, 0.6, 0.5, 0.4]) < 0.01)

    def test_single_particle(self):
        cloud = init_cloud(build_model("benchmark-eq13"), 1, np.random.default_rng(2))
        assert cloud.n_particles == 1
        assert cloud.weights[0] == pytest.approx(1.0)

    def test_rejects_zero_particles(self):
        with pytest.raises(ConfigurationError):
            init_cloud(build_model("benchmark-eq13"), 0, np.random.default_rng(3))


class TestResampleSystematic:
    def test_uniform_weights_keep_every_particle_once(self):
        cloud = cloud_from([1.0, 2.0, 3.0, 4.0], [0.25] * 4)
        for seed in range(20):
            out = resample_systematic(cloud, np.random.default_rng(seed))
            assert sorted(out.theta[:, 0]) == [1.0, 2.0, 3.0, 4.0]
            assert np.allclose(out.weights, 0.25)

    def test_single_heavy_particle_takes_all(self):
        cloud = cloud_from([5.0, 6.0, 7.0], [0.0, 1.0, 0.0])
        out = resample_systematic(cloud, np.random.default_rng(4))
        assert np.all(out.theta[:, 0] == 6.0)

    def test_stratified_offspring_counts(self):
        # Weights (1/2, 1/4, 1/4, 0) over four slots: counts (2, 1, 1, 0)
        # for every value of the single uniform draw.
        cloud = cloud_from([1.0, 2.0, 3.0, 4.0], [0.5, 0.25, 0.25, 0.0])
        for seed in range(50):
            out = resample_systematic(cloud, np.random.default_rng(seed))
            values, counts = np.unique(out.theta[:, 0], return_counts=True)
            assert dict(zip(values, counts)) == {1.0: 2, 2.0: 1, 3.0: 1}

    def test_expected_offspring_unbiased(self):
        cloud = cloud_from([0.0, 1.0], [0.3, 0.7])
        draws = [posterior_mean(resample_systematic(cloud, np.random.default_rng(s)))[0]
                 for s in range(1000)]
        direct = posterior_mean(cloud)[0]
        se = np.std(draws, ddof=1) / np.sqrt(len(draws))
        assert abs(np.mean(draws) - direct) <= 3 * se + 1e-12


class TestPosteriorMean:
    def test_single_particle(self):
        assert posterior_mean(cloud_from([3.5], [1.0]))[0] == 3.5

    def test_weighted_average(self):
        assert posterior_mean(cloud_from([0.0, 1.0], [0.3, 0.7]))[0] == pytest.approx(0.7)


class TestAdaStep:
    def test_flat_likelihood_keeps_weights(self):
        model = build_model("conjugate-scalar", {"r_var": 1e12})
        cloud = init_cloud(model, 50, np.random.default_rng(5))
        cloud.log_weights = np.log(np.random.default_rng(6).dirichlet(np.ones(50)))
        before = cloud.weights.copy()
        out = ada_step(cloud, np.array([0.3]), np.zeros(1), model,
                       AdaSchedule(), 1, np.random.default_rng(7))
        assert np.allclose(out.weights, before, atol=1e-12)

    @pytest.mark.parametrize("schedule", [
        AdaSchedule(mode="constant-decay", q0_scale=0.0),
        AdaSchedule(mode="shrinkage", delta=1.0),
    ])
    def test_degenerate_schedule_freezes_parameters(self, schedule):
        model = build_model("conjugate-scalar")
        rng = np.random.default_rng(8)
        cloud = init_cloud(model, 100, rng)
        theta0 = cloud.theta.copy()
        out = ada_step(cloud, np.array([0.4]), np.zeros(1), model, schedule, 1, rng)
        assert np.array_equal(out.theta, theta0) or out.resampled
        if out.resampled:
            assert set(out.theta[:, 0]).issubset(set(theta0[:, 0]))

    def test_tracks_kalman_with_known_parameters(self):
        a, c, q_var, r_var = 0.8, 1.0, 0.1, 0.1
        model = build_model("linear-gaussian-1d")
        horizon, n_particles = 50, 10_000
        ens = simulate_ensemble(model, 1, horizon, seed=12)
        ys = ens.measurements[0, :, 0]
        kf_mean, kf_var = kalman_filter_1d(a, c, q_var, r_var, 0.0, 1.0, ys)

        rng = np.random.default_rng(13)
        cloud = init_cloud(model, n_particles, rng)
        tol_scale = 3.0 / np.sqrt(n_particles / 100)
        for t in range(1, horizon + 1):
            cloud = ada_step(cloud, ens.measurements[0, t - 1], np.zeros(1), model,
                             AdaSchedule(), t, rng)
            pf_mean = float(cloud.weights @ cloud.x[:, 0])
            assert abs(pf_mean - kf_mean[t]) <= tol_scale * np.sqrt(kf_var[t])

    def test_weight_invariants_along_run(self):
        model = build_model("benchmark-eq13")
        ens = simulate_ensemble(model, 1, 30, seed=14)
        rng = np.random.default_rng(15)
        cloud = init_cloud(model, 200, rng)
        for t in range(1, 31):
            cloud = ada_step(cloud, ens.measurements[0, t - 1], ens.inputs[t - 1],
                             model, AdaSchedule(), t, rng)
            assert logsumexp(cloud.log_weights) == pytest.approx(0.0, abs=1e-12)
            assert np.all(cloud.weights >= 0.0)
            assert 1.0 - 1e-9 <= cloud.ess <= 200 + 1e-9
            assert cloud.n_particles == 200

    def test_support_guard_zeroes_stuck_particles(self):
        model = build_model("benchmark-eq13", {"prior_mean": [1.0, 0.7, 0.05, 0.5, 0.4]})
        rng = np.random.default_rng(16)
        cloud = init_cloud(model, 500, rng)
        ens = simulate_ensemble(build_model("benchmark-eq13"), 1, 1, seed=17)
        out = ada_step(cloud, ens.measurements[0, 0], np.zeros(1), model,
                       AdaSchedule(mode="constant-decay", q0_scale=0.1), 1, rng)
        live = out.weights > 0
        assert np.all(out.theta[live, 1] > 0.0)

    def test_all_violating_particles_degenerate(self):
        model = build_model("benchmark-eq13")
        model.param_constraint = lambda theta: np.zeros(theta.shape[0], dtype=bool)
        rng = np.random.default_rng(18)
        cloud = init_cloud(model, 50, rng)
        with pytest.raises(DegeneracyError, match="t=1"):
            ada_step(cloud, np.array([0.5]), np.zeros(1), model, AdaSchedule(), 1, rng)


class TestIdentify:
    def test_empty_horizon(self):
        model = build_model("benchmark-eq13")
        res = identify(model, np.empty((0, 1)), np.empty((0, 1)), 100, seed=0)
        assert res.estimates.shape == (0, 4)

    def test_deterministic_under_seed(self):
        model = build_model("benchmark-eq13")
        ens = simulate_ensemble(model, 1, 20, seed=19)
        a = identify(model, ens.measurements[0], ens.inputs, 200, seed=20)
        b = identify(model, ens.measurements[0], ens.inputs, 200, seed=20)
        assert np.array_equal(a.estimates, b.estimates)
        assert np.array_equal(a.ess, b.ess)

    def test_noise_free_linear_in_theta_mse_decreases(self):
        model = build_model("conjugate-scalar", {"r_var": 1e-4})
        theta_true = 0.7
        horizon = 100
        ys = np.full((horizon, 1), theta_true)  # noise-free record
        errors = {10: [], 50: [], 100: []}
        for run in range(20):
            res = identify(model, ys, np.zeros((horizon, 1)), 300, seed=21, stream=(run,))
            for t in errors:
                errors[t].append((res.estimates[t - 1, 0] - theta_true) ** 2)
        mse = {t: np.mean(v) for t, v in errors.items()}
        assert mse[10] > mse[50] > mse[100]

    def test_schedule_validation(self):
        with pytest.raises(ConfigurationError):
            AdaSchedule(mode="shrinkage", delta=0.5)
        with pytest.raises(ConfigurationError):
            AdaSchedule(mode="nope")
        with pytest.raises(ConfigurationError):
            AdaSchedule(gamma=0.0)
