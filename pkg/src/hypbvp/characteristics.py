"""Characteristic curves xi -> omega_j(xi; x, t) of the hyperbolic system.

omega solves d(omega)/d(xi) = 1 / a_j(xi, omega) with omega(x) = t.  All
integration is classic RK4 with a fixed number of substeps per node
interval, so node placement and results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .expr import diff, evaluate


class CharacteristicError(RuntimeError):
    pass


class HyperbolicityError(CharacteristicError):
    """A speed came closer to zero than the configured floor."""

    def __init__(self, j, xi, tau, value, a_min):
        self.j, self.xi, self.tau, self.value = j, xi, tau, value
        super().__init__(f"|a_{j + 1}({xi:.6g}, {tau:.6g})| = {abs(value):.3g} "
                         f"is below a_min = {a_min:g}")


class DomainExitError(CharacteristicError):
    pass


@lru_cache(maxsize=256)
def time_derivative(e):
    return diff(e, "t")


def speed(spec, j, xi, tau, a_min=1e-6):
    """a_j at (xi, tau), checked against the hyperbolicity floor."""
    a = evaluate(spec.a[j], xi, tau)
    bad = np.abs(a) < a_min
    if np.any(bad):
        k = int(np.argmax(np.ravel(bad)))
        xs = np.broadcast_to(xi, np.shape(a)).ravel()
        ts = np.broadcast_to(tau, np.shape(a)).ravel()
        raise HyperbolicityError(j, float(xs[k]), float(ts[k]),
                                 float(np.ravel(a)[k]), a_min)
    return a


def advance(spec, j, xi0, omega, length, substeps=4, a_min=1e-6):
    """Integrate omega from xi0 over ``length`` in xi with ``substeps`` RK4 steps."""
    h = np.asarray(length, dtype=float) / substeps
    xi = np.asarray(xi0, dtype=float)
    w = np.asarray(omega, dtype=float)
    if spec.a[j].is_constant:
        # RK4 is exact here; skip the stages
        return w + substeps * h / speed(spec, j, xi, w, a_min)
    a = spec.a[j]
    inv = lambda s, w: np.divide(1.0, evaluate(a, s, w))
    with np.errstate(divide="ignore", invalid="ignore"):
        for q in range(substeps):
            s = xi + q * h
            # the start node is checked, later nodes reuse the end check
            k1 = 1.0 / speed(spec, j, s, w, a_min) if q == 0 else inv(s, w)
            k2 = inv(s + 0.5 * h, w + 0.5 * h * k1)
            k3 = inv(s + 0.5 * h, w + 0.5 * h * k2)
            k4 = inv(s + h, w + h * k3)
            w = w + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    # stages are unchecked; a degenerate speed shows up at the end node
    if not np.all(np.isfinite(w)):
        raise HyperbolicityError(j, float(np.ravel(xi)[0]), float("nan"), 0.0, a_min)
    speed(spec, j, xi + substeps * h, w, a_min)
    return w


@dataclass
class CharacteristicPath:
    """Samples of one characteristic on ordered xi nodes covering [0, 1]."""

    j: int
    x: float
    t: float
    xi: np.ndarray
    omega: np.ndarray
    anchor: int
    direction: int

    def at(self, xi):
        """omega at a node value ``xi`` (must be one of the nodes)."""
        return float(self.omega[self.index(xi)])

    def index(self, xi):
        k = int(np.argmin(np.abs(self.xi - xi)))
        if abs(self.xi[k] - xi) > 1e-12:
            raise ValueError(f"xi = {xi!r} is not a node of this path")
        return k


def trace(spec, j, x, t, xi_nodes, substeps=4, a_min=1e-6, t_bounds=None):
    """Trace the j-th characteristic through (x, t) on the given xi nodes.

    ``x`` is inserted into the nodes if missing.  With ``t_bounds`` set,
    leaving that time interval raises :class:`DomainExitError`.
    """
    nodes = np.unique(np.concatenate([np.asarray(xi_nodes, dtype=float), [x]]))
    if nodes[0] < 0.0 or nodes[-1] > 1.0:
        raise ValueError("xi nodes must lie in [0, 1]")
    anchor = int(np.searchsorted(nodes, x))
    omega = np.empty_like(nodes)
    omega[anchor] = t
    for k in range(anchor + 1, len(nodes)):
        omega[k] = advance(spec, j, nodes[k - 1], omega[k - 1],
                           nodes[k] - nodes[k - 1], substeps, a_min)
    for k in range(anchor - 1, -1, -1):
        omega[k] = advance(spec, j, nodes[k + 1], omega[k + 1],
                           nodes[k] - nodes[k + 1], substeps, a_min)
    a0 = speed(spec, j, x, t, a_min)
    path = CharacteristicPath(j, float(x), float(t), nodes, omega, anchor,
                              1 if a0 > 0 else -1)
    if t_bounds is not None:
        lo, hi = t_bounds
        if omega.min() < lo or omega.max() > hi:
            raise DomainExitError(f"characteristic {j + 1} through ({x:g}, {t:g}) "
                                  f"leaves [{lo:g}, {hi:g}]")
    return path


def trace_to(spec, j, xi, x, t, steps=200, substeps=1, integrand=None, a_min=1e-6):
    """omega_j(xi; x, t) for arrays of (xi, x, t), using ``steps`` uniform nodes.

    If ``integrand(eta, omega)`` is given, also returns the composite trapezoid
    integral from x to xi of the integrand along the path.
    """
    xi, x, t = np.broadcast_arrays(np.asarray(xi, float), np.asarray(x, float),
                                   np.asarray(t, float))
    h = (xi - x) / steps
    w = t.astype(float).copy()
    eta = x.astype(float)
    total = np.zeros_like(w)
    g_prev = integrand(eta, w) if integrand is not None else None
    for _ in range(steps):
        w = advance(spec, j, eta, w, h, substeps, a_min)
        eta = eta + h
        if integrand is not None:
            g = integrand(eta, w)
            total = total + 0.5 * h * (g_prev + g)
            g_prev = g
    if integrand is None:
        return w
    return w, total


def _speed_gradient_integral(spec, j, xi, x, t, steps, substeps):
    """omega_j(xi) and int_xi^x (d_t a_j / a_j^2)(eta, omega(eta)) d eta."""
    dadt = time_derivative(spec.a[j])

    def g(eta, w):
        a = evaluate(spec.a[j], eta, w)
        return evaluate(dadt, eta, w) / (a * a)

    w, from_x = trace_to(spec, j, xi, x, t, steps, substeps, integrand=g)
    return w, -from_x


def domega_dt(spec, j, xi, x, t, steps=400, substeps=1):
    """d omega_j(xi; x, t) / dt = exp(int_xi^x (d_t a_j / a_j^2) d eta)."""
    _, integral = _speed_gradient_integral(spec, j, xi, x, t, steps, substeps)
    out = np.exp(integral)
    return float(out) if np.ndim(out) == 0 else out


def domega_dx(spec, j, xi, x, t, steps=400, substeps=1):
    """d omega_j(xi; x, t) / dx = -exp(int_xi^x (d_t a_j / a_j^2) d eta) / a_j(x, t)."""
    _, integral = _speed_gradient_integral(spec, j, xi, x, t, steps, substeps)
    out = -np.exp(integral) / evaluate(spec.a[j], x, t)
    return float(out) if np.ndim(out) == 0 else out
