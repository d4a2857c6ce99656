"""Scalar linear-Gaussian Kalman filter, used as a closed-form cross-check
for the information recursion and the particle filter."""

from __future__ import annotations

import numpy as np


def kalman_filter_1d(a, c, q_var, r_var, m0, p0, ys, us=None):
    """Filter a scalar series y_1..y_T for x' = a*x + u + v, y = c*x + w.

    Returns (means, variances) of shape (T+1,), index t holding the
    posterior moments of x_t given y_{1:t} (index 0 is the prior).
    """
    ys = np.asarray(ys, dtype=float).reshape(-1)
    horizon = ys.size
    us = np.zeros(horizon) if us is None else np.asarray(us, dtype=float).reshape(-1)
    means = np.empty(horizon + 1)
    variances = np.empty(horizon + 1)
    means[0], variances[0] = m0, p0
    m, p = float(m0), float(p0)
    for t in range(horizon):
        m_pred = a * m + us[t]
        p_pred = a * a * p + q_var
        s = c * c * p_pred + r_var
        k = p_pred * c / s
        m = m_pred + k * (ys[t] - c * m_pred)
        p = (1.0 - k * c) * p_pred
        means[t + 1], variances[t + 1] = m, p
    return means, variances
