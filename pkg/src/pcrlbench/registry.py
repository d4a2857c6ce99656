"""Built-in model registry.

``benchmark-eq13``: scalar nonlinear system with four unknown parameters,

    x' = a*x + x/(b + x^2) + u + v,    y = c*x + d*x^2 + w,

Q = R = 1e-3, prior z0 ~ N([1, .7, .6, .5, .4], 0.01*I).  Analytic first and
second derivatives of both mean maps are supplied, so the bound engine takes
its fast path.  The default input is a random binary signal of amplitude 1.0:
the parameters need strong excitation, and at this amplitude the nonlinear
denominator parameter is clearly the hardest to estimate while the others
concentrate, which is the regime the error analysis targets.

``linear-gaussian-1d``: scalar linear system with known gains (no
parameters), the closed-form cross-check case for the bound recursion.

``conjugate-scalar``: direct noisy observation of a single static parameter,
y = theta + w, whose posterior is available in closed form.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from pcrlbench.models import ConfigurationError, CovSchedule, InputSpec, MapDerivatives, SsmModel


def _input_spec_from(options: dict, default_amplitude: float = 0.5) -> InputSpec:
    return InputSpec(
        kind=options.get("input", "prbs"),
        amplitude=float(options.get("input_amplitude", default_amplitude)),
        seed=int(options.get("input_seed", 7)),
        values=options.get("input_values"),
    )


def build_benchmark_eq13(**options) -> SsmModel:
    q_var = float(options.get("q_var", 1e-3))
    r_var = float(options.get("r_var", 1e-3))
    prior_mean = np.asarray(options.get("prior_mean", [1.0, 0.7, 0.6, 0.5, 0.4]), dtype=float)
    prior_cov = np.asarray(options.get("prior_cov", np.diag([0.01] * 5)), dtype=float)

    def f(x, theta, t):
        x0 = x[..., 0]
        a, b = theta[..., 0], theta[..., 1]
        return (a * x0 + x0 / (b + x0**2))[..., None]

    def g(x, theta, t):
        x0 = x[..., 0]
        c, d = theta[..., 2], theta[..., 3]
        return (c * x0 + d * x0**2)[..., None]

    def f_derivs(x, theta, t):
        x0 = float(x[0])
        a, b = float(theta[0]), float(theta[1])
        den = b + x0**2
        jac_x = np.array([[a + (b - x0**2) / den**2]])
        jac_theta = np.array([[x0, -x0 / den**2, 0.0, 0.0]])
        hess_xx = np.array([[[-2.0 * x0 * (3.0 * b - x0**2) / den**3]]])
        hess_xtheta = np.zeros((1, 1, 4))
        hess_xtheta[0, 0, 0] = 1.0
        hess_xtheta[0, 0, 1] = (3.0 * x0**2 - b) / den**3
        hess_tt = np.zeros((1, 4, 4))
        hess_tt[0, 1, 1] = 2.0 * x0 / den**3
        return MapDerivatives(jac_x, jac_theta, hess_xx, hess_xtheta, hess_tt)

    def g_derivs(x, theta, t):
        x0 = float(x[0])
        c, d = float(theta[2]), float(theta[3])
        jac_x = np.array([[c + 2.0 * d * x0]])
        jac_theta = np.array([[0.0, 0.0, x0, x0**2]])
        hess_xx = np.array([[[2.0 * d]]])
        hess_xtheta = np.zeros((1, 1, 4))
        hess_xtheta[0, 0, 2] = 1.0
        hess_xtheta[0, 0, 3] = 2.0 * x0
        return MapDerivatives(jac_x, jac_theta, hess_xx, hess_xtheta, np.zeros((1, 4, 4)))

    def constraint(theta):
        # b <= 0 makes the transition singular on the reachable set.
        return theta[..., 1] > 0.0

    return SsmModel(
        name="benchmark-eq13",
        state_dim=1,
        param_dim=4,
        meas_dim=1,
        transition_mean=f,
        measurement_mean=g,
        process_noise=CovSchedule(q_var, 1),
        meas_noise=CovSchedule(r_var, 1),
        prior_mean=prior_mean,
        prior_cov=prior_cov,
        input_spec=_input_spec_from(options, default_amplitude=1.0),
        transition_derivs=f_derivs,
        measurement_derivs=g_derivs,
        param_constraint=constraint,
    )


def build_linear_gaussian_1d(**options) -> SsmModel:
    a = float(options.get("a", 0.8))
    c = float(options.get("c", 1.0))
    q_var = float(options.get("q_var", 0.1))
    r_var = float(options.get("r_var", 0.1))
    m0 = float(options.get("prior_mean", 0.0))
    p0 = float(options.get("prior_var", 1.0))

    def f(x, theta, t):
        return a * x

    def g(x, theta, t):
        return c * x

    def f_derivs(x, theta, t):
        return MapDerivatives(
            np.array([[a]]), np.zeros((1, 0)), np.zeros((1, 1, 1)),
            np.zeros((1, 1, 0)), np.zeros((1, 0, 0)),
        )

    def g_derivs(x, theta, t):
        return MapDerivatives(
            np.array([[c]]), np.zeros((1, 0)), np.zeros((1, 1, 1)),
            np.zeros((1, 1, 0)), np.zeros((1, 0, 0)),
        )

    spec = _input_spec_from(options) if "input" in options else InputSpec(kind="zero")
    return SsmModel(
        name="linear-gaussian-1d",
        state_dim=1,
        param_dim=0,
        meas_dim=1,
        transition_mean=f,
        measurement_mean=g,
        process_noise=CovSchedule(q_var, 1),
        meas_noise=CovSchedule(r_var, 1),
        prior_mean=np.array([m0]),
        prior_cov=np.array([[p0]]),
        input_spec=spec,
        transition_derivs=f_derivs,
        measurement_derivs=g_derivs,
    )


def build_conjugate_scalar(**options) -> SsmModel:
    theta_mean = float(options.get("theta_mean", 0.5))
    theta_var = float(options.get("theta_var", 0.09))
    r_var = float(options.get("r_var", 0.04))
    state_var = float(options.get("state_var", 1e-12))

    def f(x, theta, t):
        return 0.0 * x

    def g(x, theta, t):
        return 0.0 * x + theta[..., :1]

    def f_derivs(x, theta, t):
        return MapDerivatives(
            np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1, 1)),
            np.zeros((1, 1, 1)), np.zeros((1, 1, 1)),
        )

    def g_derivs(x, theta, t):
        return MapDerivatives(
            np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1, 1)),
            np.zeros((1, 1, 1)), np.zeros((1, 1, 1)),
        )

    return SsmModel(
        name="conjugate-scalar",
        state_dim=1,
        param_dim=1,
        meas_dim=1,
        transition_mean=f,
        measurement_mean=g,
        process_noise=CovSchedule(state_var, 1),
        meas_noise=CovSchedule(r_var, 1),
        prior_mean=np.array([0.0, theta_mean]),
        prior_cov=np.diag([state_var, theta_var]),
        input_spec=InputSpec(kind="zero"),
        transition_derivs=f_derivs,
        measurement_derivs=g_derivs,
    )


_REGISTRY: dict[str, tuple[Callable[..., SsmModel], str]] = {
    "benchmark-eq13": (build_benchmark_eq13, "scalar nonlinear system, four unknown parameters"),
    "linear-gaussian-1d": (build_linear_gaussian_1d, "scalar linear system, known gains"),
    "conjugate-scalar": (build_conjugate_scalar, "direct observation of one static parameter"),
}


def available_models() -> dict[str, str]:
    return {name: desc for name, (_, desc) in _REGISTRY.items()}


def build_model(name: str, options: Optional[dict] = None) -> SsmModel:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigurationError(f"unknown model {name!r}; available: {known}")
    builder, _ = _REGISTRY[name]
    return builder(**(options or {}))
