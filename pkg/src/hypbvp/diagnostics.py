"""Sampled checks of the standing hypotheses and residuals of computed solutions.

Every check samples coefficients on the grid points and cell midpoints of
the padded domain (capped at 200 x 400 samples).  Verdicts are
``pass``/``warn``/``fail``; a failing verdict always names a witness point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import CharacteristicError
from .expr import DiffError, EvalError, diff, evaluate
from .grid import Domain, GridFunction, interp_rows, sample_points
from .operators import IntegralOperators

CONDITIONS = ("smoothness", "hyperbolicity", "r-regularity", "factorization",
              "dissipativity", "coupling-decay")


@dataclass
class HypothesisVerdict:
    condition: str
    status: str
    value: float = math.nan
    witness: dict | None = None
    message: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.status not in ("pass", "warn", "fail"):
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "fail" and not self.witness:
            raise ValueError("a failing verdict needs a witness")

    @property
    def ok(self):
        return self.status == "pass"

    def line(self):
        text = f"{self.condition}: {self.status}"
        if not math.isnan(self.value):
            text += f" (value {self.value:.6g})"
        if self.witness:
            text += " at " + ", ".join(f"{k}={_show(v)}" for k, v in self.witness.items())
        if self.message:
            text += f"; {self.message}"
        return text


def _show(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _samples(dom, t_lo=None, t_hi=None):
    lo = -dom.t_pad if t_lo is None else t_lo
    hi = dom.t_pad if t_hi is None else t_hi
    return sample_points(min(dom.nx, 200), min(dom.nt, 400), lo, hi)


def _values(e, X, T):
    return np.broadcast_to(np.asarray(evaluate(e, X, T), dtype=float), X.shape)


def _witness(X, T, i, **extra):
    out = dict(extra)
    out["x"] = float(X[i])
    out["t"] = float(T[i])
    return out


# ------------------------------------------------------------- hypotheses


def check_smoothness(spec, dom):
    """Coefficients and their first derivatives are finite on the sampled domain."""
    X, T = _samples(dom)
    named = [(f"a_{j + 1}", e) for j, e in enumerate(spec.a)]
    named += [(f"b_{j + 1}{k + 1}", spec.b[j][k]) for j in range(spec.n) for k in range(spec.n)]
    named += [(f"f_{j + 1}", e) for j, e in enumerate(spec.f)]
    worst = 0.0
    for label, e in named:
        try:
            vals = [_values(e, X, T)]
        except EvalError as exc:
            return HypothesisVerdict("smoothness", "fail", math.inf,
                                     {"coefficient": label}, str(exc))
        if label[0] != "f":
            try:
                for var in ("x", "t"):
                    vals.append(_values(diff(e, var), X, T))
            except DiffError as exc:
                return HypothesisVerdict("smoothness", "warn", math.nan, None,
                                         f"{label}: {exc}; only sampled values checked")
            except EvalError as exc:
                return HypothesisVerdict("smoothness", "fail", math.inf,
                                         {"coefficient": label}, str(exc))
        for v in vals:
            bad = ~np.isfinite(v)
            if bad.any():
                i = int(np.argmax(bad))
                return HypothesisVerdict("smoothness", "fail", math.inf,
                                         _witness(X, T, i, coefficient=label), "non-finite value")
            worst = max(worst, float(np.max(np.abs(v))))
    return HypothesisVerdict("smoothness", "pass", worst,
                             message="sup of coefficients and first derivatives")


def check_hyperbolicity(spec, dom, a_min=None):
    """a_j >= a_min for components entering at x = 0, a_j <= -a_min otherwise."""
    a_min = dom.a_min if a_min is None else a_min
    X, T = _samples(dom)
    worst, witness = math.inf, None
    for j, e in enumerate(spec.a):
        a = _values(e, X, T)
        sign = 1.0 if j < spec.m else -1.0
        margin = sign * a
        low = float(margin.min())
        if low < worst:
            worst = low
            bad = margin < a_min
            if bad.any():
                # report the violating sample closest to degeneracy
                idx = np.nonzero(bad)[0]
                i = int(idx[np.argmin(np.abs(a[idx]))])
                witness = _witness(X, T, i, component=j + 1, a=float(a[i]))
    if worst >= a_min:
        return HypothesisVerdict("hyperbolicity", "pass", worst,
                                 message=f"smallest signed speed, a_min = {a_min:g}")
    return HypothesisVerdict("hyperbolicity", "fail", worst, witness,
                             f"speed sign or size violates the inflow convention (a_min = {a_min:g})")


def check_r_regularity(spec, dom):
    """Holds by construction for reflection operators with differentiable weights."""
    X, T = _samples(dom)
    for j, terms in enumerate(spec.boundary.terms):
        for term in terms:
            try:
                w = _values(term.weight, X, T)
                dw = _values(diff(term.weight, "t"), X, T)
            except DiffError as exc:
                return HypothesisVerdict("r-regularity", "warn", math.nan, None,
                                         f"weight of component {j + 1}: {exc}")
            bad = ~(np.isfinite(w) & np.isfinite(dw))
            if bad.any():
                i = int(np.argmax(bad))
                return HypothesisVerdict("r-regularity", "fail", math.inf,
                                         _witness(X, T, i, component=j + 1),
                                         "non-finite reflection weight")
    return HypothesisVerdict("r-regularity", "pass", message="by construction for reflection class")


def check_factorization(spec, dom, tol=1e-9, bound=1e3):
    """b_jk = bt_jk (a_k - a_j): checked against supplied bt_jk, else inferred."""
    X, T = _samples(dom)
    a = [_values(e, X, T) for e in spec.a]
    worst_ratio, worst_mismatch = 0.0, 0.0
    warn = None
    for j in range(spec.n):
        for k in range(spec.n):
            if j == k:
                continue
            b = _values(spec.b[j][k], X, T)
            gap = a[k] - a[j]
            if (j, k) in spec.btilde:
                mismatch = np.abs(b - _values(spec.btilde[(j, k)], X, T) * gap)
                i = int(np.argmax(mismatch))
                worst_mismatch = max(worst_mismatch, float(mismatch[i]))
                if mismatch[i] > tol:
                    return HypothesisVerdict(
                        "factorization", "fail", float(mismatch[i]),
                        _witness(X, T, i, j=j + 1, k=k + 1, b=float(b[i])),
                        "supplied factor does not reproduce the coupling")
                continue
            if not np.any(b):
                continue
            close = np.abs(gap) < tol
            bad = close & (np.abs(b) >= tol)
            if bad.any():
                i = int(np.argmax(bad))
                return HypothesisVerdict(
                    "factorization", "fail", float(abs(b[i])),
                    _witness(X, T, i, j=j + 1, k=k + 1, b=float(b[i]), gap=float(gap[i])),
                    "coupling does not vanish where the speeds coincide")
            ratio = np.where(close, 0.0, np.abs(b) / np.where(close, 1.0, np.abs(gap)))
            i = int(np.argmax(ratio))
            if ratio[i] > worst_ratio:
                worst_ratio = float(ratio[i])
                if worst_ratio > bound:
                    warn = _witness(X, T, i, j=j + 1, k=k + 1)
    if warn is not None:
        return HypothesisVerdict("factorization", "warn", worst_ratio, warn,
                                 f"|b_jk / (a_k - a_j)| exceeds {bound:g}")
    return HypothesisVerdict("factorization", "pass", max(worst_ratio, worst_mismatch),
                             message="sup |b_jk/(a_k - a_j)| or factor mismatch")


def check_coupling_decay(spec, dom, eps=1e-9, window=None):
    """sup of off-diagonal couplings over sampled times with |t| > window (default T/2)."""
    window = dom.T / 2 if window is None else window
    X, T = _samples(dom)
    outside = np.abs(T) > window
    if not outside.any():
        return HypothesisVerdict("coupling-decay", "warn", math.nan, None,
                                 "padded domain has no samples outside the window")
    X, T = X[outside], T[outside]
    sup, witness = 0.0, None
    for j in range(spec.n):
        for k in spec.offdiag(j):
            b = np.abs(_values(spec.b[j][k], X, T))
            i = int(np.argmax(b))
            if b[i] > sup:
                sup = float(b[i])
                witness = _witness(X, T, i, j=j + 1, k=k + 1)
    scale = f"at truncation scale, |t| in ({window:g}, {dom.t_pad:g}]"
    if sup < eps:
        return HypothesisVerdict("coupling-decay", "pass", sup, message=scale)
    return HypothesisVerdict("coupling-decay", "fail", sup, witness, scale)


# ------------------------------------------------------------ norm of C^l


def diagnostic_domain(dom, depth, nx_max=100, nt_max=1600):
    """Domain with at least ``depth`` passes of padding and a moderate grid."""
    deep = dom.with_depth(max(depth, dom.depth))
    nx = min(deep.nx, nx_max)
    nt = min(deep.nt, nt_max)
    return Domain(deep.T, nx, nt, deep.depth, deep.t_pad, deep.speed_floor,
                  deep.sigma_max, deep.a_min)


def _power(ops, v, ell):
    for _ in range(ell):
        v = ops.C(v)
    return v


def estimate_C_power_norm(spec, dom, ell, ops=None, probes=64, seed=0,
                          candidates=16, return_witness=False):
    """Lower bound for the sup-norm of C^ell, measured on |t| <= T.

    Probes: constant sign patterns, ``probes`` random functions and the sign
    pattern of the largest rows of C^ell (exact for reflection operators).
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if ell > dom.depth:
        raise CharacteristicError(f"{ell} compositions of C leave the padded domain "
                                  f"(depth {dom.depth}); increase the depth")
    grid = dom.grid
    if ops is None:
        ops = IntegralOperators(spec, grid, a_min=dom.a_min, fan=False)
    n = spec.n
    mask = grid.window_rows()
    best, witness = 0.0, None

    def consider(v):
        nonlocal best, witness
        norm_v = float(np.max(np.abs(v.values)))
        if norm_v == 0.0:
            return
        w = np.abs(_power(ops, v, ell).values[:, :, mask])
        i = int(np.argmax(w))
        ratio = float(w.flat[i]) / norm_v
        if ratio > best:
            j, col, row = np.unravel_index(i, w.shape)
            best = ratio
            witness = {"component": int(j) + 1, "x": float(grid.x[col]),
                       "t": float(grid.t[mask][row])}

    shape = (n, grid.nx + 1, grid.rows)
    patterns = range(2 ** n) if n <= 10 else range(2)
    for bits in patterns:
        signs = np.array([1.0 if (bits >> j) & 1 == 0 else -1.0 for j in range(n)])
        consider(GridFunction(grid, np.broadcast_to(signs[:, None, None], shape).copy()))
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        consider(GridFunction(grid, rng.uniform(-1.0, 1.0, shape)))
    for v in _adversarial(ops, ell, mask, candidates):
        consider(GridFunction(grid, v.reshape(shape)))
    if return_witness:
        return best, witness
    return best


def _adversarial(ops, ell, mask, candidates):
    M = ops.c_matrix().tocsr()
    if M.nnz == 0:
        return []
    A = abs(M)
    r = np.ones(M.shape[0])
    for _ in range(ell):
        r = A @ r
    n, nx1, rows = ops.spec.n, ops.grid.nx + 1, ops.grid.rows
    inside = np.broadcast_to(mask[None, None, :], (n, nx1, rows)).reshape(-1)
    r = np.where(inside, r, -1.0)
    top = np.argsort(-r, kind="stable")[:candidates]
    out = []
    MT = M.T.tocsr()
    for i in top:
        if r[i] <= 0:
            break
        row = np.zeros(M.shape[0])
        row[i] = 1.0
        for _ in range(ell):
            row = MT @ row
        out.append(np.where(row >= 0, 1.0, -1.0))
    return out


def check_dissipativity(spec, dom, ell=None, max_ell=8, threads=1):
    """Smallest ell <= max_ell with estimated norm of C^ell below 1."""
    ells = [ell] if ell is not None else list(range(1, max_ell + 1))
    ddom = diagnostic_domain(dom, max(ells))
    try:
        ops = IntegralOperators(spec, ddom.grid, a_min=ddom.a_min, fan=False, threads=threads)
    except CharacteristicError as exc:
        return HypothesisVerdict("dissipativity", "warn", math.nan, None,
                                 f"not evaluated: {exc}")
    estimates = {}
    witness = None
    for e in ells:
        value, witness = estimate_C_power_norm(spec, ddom, e, ops=ops, return_witness=True)
        estimates[e] = value
        if value < 1.0:
            return HypothesisVerdict("dissipativity", "pass", value, None,
                                     f"norm of C^{e} estimated below 1",
                                     {"ell": e, "estimates": estimates})
    last = ells[-1]
    return HypothesisVerdict("dissipativity", "fail", estimates[last],
                             witness or {"ell": last},
                             f"norm of C^l estimated >= 1 for l = {ells[0]}..{last}",
                             {"ell": last, "estimates": estimates})


def estimate_D_norm(spec, dom, ops=None):
    """Max row sum of the discrete D on the interior window."""
    if ops is None:
        ops = IntegralOperators(spec, dom.grid, a_min=dom.a_min)
    return ops.d_norm_bound()


def run_all_checks(spec, dom, eps=1e-9, window=None, factor_tol=1e-9, factor_bound=1e3,
                   ell=None, max_ell=8, threads=1):
    return [
        check_smoothness(spec, dom),
        check_hyperbolicity(spec, dom),
        check_r_regularity(spec, dom),
        check_factorization(spec, dom, factor_tol, factor_bound),
        check_dissipativity(spec, dom, ell, max_ell, threads),
        check_coupling_decay(spec, dom, eps, window),
    ]


# -------------------------------------------------------------- residuals


@dataclass
class Residuals:
    pde: float
    bc: float
    int: float

    def as_dict(self):
        return {"pde": self.pde, "bc": self.bc, "int": self.int}


def residuals(spec, u, f=None, window=None, ops=None):
    """Sup-norm residuals of the differential, boundary and integral forms on |t| <= window."""
    g = u.grid
    if window is None:
        window = g.T if math.isfinite(g.T) else None
    mask = g.window_rows(window) if window is not None else np.ones(g.rows, bool)
    X, T = np.meshgrid(g.x, g.t, indexing="ij")
    fv = GridFunction.sample(g, spec.f).values if f is None else \
        (f.values if isinstance(f, GridFunction) else GridFunction.sample(g, f).values)

    # centered differences at interior points
    v = u.values
    inner = mask.copy()
    inner[0] = inner[-1] = False
    pde = 0.0
    if g.nx >= 2 and inner.any():
        ut = (v[:, 1:-1, 2:] - v[:, 1:-1, :-2]) / (2 * g.dt)
        ux = (v[:, 2:, 1:-1] - v[:, :-2, 1:-1]) / (2 * g.dx)
        Xi, Ti = X[1:-1, 1:-1], T[1:-1, 1:-1]
        for j in range(spec.n):
            r = ut[j] + _values(spec.a[j], Xi, Ti) * ux[j] - fv[j, 1:-1, 1:-1]
            for k in range(spec.n):
                r = r + _values(spec.b[j][k], Xi, Ti) * v[k, 1:-1, 1:-1]
            sel = inner[1:-1]
            if sel.any():
                pde = max(pde, float(np.max(np.abs(r[:, sel]))))

    bc = 0.0
    t = g.t[mask]
    for j in range(spec.n):
        col = 0 if j < spec.m else g.nx
        target = np.array(np.broadcast_to(evaluate(spec.boundary.data[j], 0.0, t), t.shape))
        for term in spec.boundary.terms[j]:
            side = 0 if term.side == 0 else g.nx
            target = target + _values(term.weight, np.zeros_like(t), t) * \
                interp_rows(v[term.source], side, g.position(t + term.shift))
        bc = max(bc, float(np.max(np.abs(v[j, col, mask] - target)))) if t.size else bc

    if ops is None:
        ops = IntegralOperators(spec, g)
    rhs = ops.data() + ops.F(GridFunction(g, fv))
    mismatch = u - ops.C(u) - ops.D(u) - rhs
    integral = mismatch.sup_norm(window) if window is not None else mismatch.sup_norm()
    return Residuals(pde, bc, integral)


__all__ = [
    "HypothesisVerdict", "Residuals", "check_smoothness", "check_hyperbolicity",
    "check_r_regularity", "check_factorization", "check_coupling_decay",
    "check_dissipativity", "estimate_C_power_norm", "estimate_D_norm",
    "run_all_checks", "residuals", "diagnostic_domain",
]
