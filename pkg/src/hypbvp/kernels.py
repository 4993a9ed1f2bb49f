"""Exponential weight c_j and density d_j along characteristics.

    c_j(xi; x, t) = exp( int_x^xi (b_jj / a_j)(eta, omega_j(eta)) d eta )
    d_j(xi; x, t) = c_j(xi; x, t) / a_j(xi, omega_j(xi))

Integrals use the composite trapezoid rule on path nodes.
"""

from __future__ import annotations

import numpy as np

from .expr import evaluate


def damping_rate(spec, j, xi, omega):
    """Integrand b_jj / a_j of the log-weight."""
    return evaluate(spec.b[j][j], xi, omega) / evaluate(spec.a[j], xi, omega)


def log_weight_step(g_from, g_to, dxi):
    """Trapezoid increment of log c over one node interval of signed length dxi."""
    return 0.5 * dxi * (g_from + g_to)


def log_weights(spec, path):
    """log c_j(xi_k; x, t) for every node of ``path``."""
    g = np.asarray(damping_rate(spec, path.j, path.xi, path.omega), dtype=float)
    g = np.broadcast_to(g, path.xi.shape)
    out = np.zeros_like(path.xi)
    a = path.anchor
    for k in range(a + 1, len(path.xi)):
        out[k] = out[k - 1] + log_weight_step(g[k - 1], g[k], path.xi[k] - path.xi[k - 1])
    for k in range(a - 1, -1, -1):
        out[k] = out[k + 1] + log_weight_step(g[k + 1], g[k], path.xi[k] - path.xi[k + 1])
    return out


def kernel_c(spec, path, xi):
    return float(np.exp(log_weights(spec, path)[path.index(xi)]))


def kernel_d(spec, path, xi):
    k = path.index(xi)
    c = np.exp(log_weights(spec, path)[k])
    return float(c / evaluate(spec.a[path.j], path.xi[k], path.omega[k]))
