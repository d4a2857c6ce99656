"""Central finite differences for gradients and Hessians of log densities.

Step rule: h_i = max(|v_i|, 1) * eps**(1/3) per coordinate.  Hessians are
central differences of the finite-difference gradient, which keeps the rule
uniform and is accurate to ~1e-6 relative for the smooth log densities
handled here.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def fd_steps(v: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(v), 1.0) * FD_STEP


def fd_gradient(func: Callable[[np.ndarray], float], v: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    v = np.asarray(v, dtype=float)
    h = fd_steps(v)
    grad = np.empty_like(v)
    for i in range(v.size):
        vp = v.copy()
        vm = v.copy()
        vp[i] += h[i]
        vm[i] -= h[i]
        grad[i] = (func(vp) - func(vm)) / (2.0 * h[i])
    return grad


def fd_hessian(func: Callable[[np.ndarray], float], v: np.ndarray) -> np.ndarray:
    """Hessian as central differences of the finite-difference gradient."""
    v = np.asarray(v, dtype=float)
    h = fd_steps(v)
    d = v.size
    hess = np.empty((d, d))
    for j in range(d):
        vp = v.copy()
        vm = v.copy()
        vp[j] += h[j]
        vm[j] -= h[j]
        hess[:, j] = (fd_gradient(func, vp) - fd_gradient(func, vm)) / (2.0 * h[j])
    return 0.5 * (hess + hess.T)


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], v: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued function."""
    v = np.asarray(v, dtype=float)
    h = fd_steps(v)
    cols = []
    for i in range(v.size):
        vp = v.copy()
        vm = v.copy()
        vp[i] += h[i]
        vm[i] -= h[i]
        cols.append((np.atleast_1d(func(vp)) - np.atleast_1d(func(vm))) / (2.0 * h[i]))
    if not cols:
        return np.zeros((np.atleast_1d(func(v)).size, 0))
    return np.stack(cols, axis=1)
