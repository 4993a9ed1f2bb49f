"""Fixed-point solution of u = Cu + Du + Ff + data on the truncated strip.

Three drivers share one :class:`~hypbvp.operators.IntegralOperators`:

* :func:`picard_solve`: global successive substitution;
* :func:`forward_march`: row-by-row time marching from an initial trace
  (or from a stored history);
* :func:`two_phase_solve`: Picard on the rows t <= -T, then marching.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, Num, as_expr, evaluate
from .grid import Domain, Grid, GridFunction
from .operators import IntegralOperators, gather


class SolverError(RuntimeError):
    pass


class DivergenceError(SolverError):
    def __init__(self, message, report=None, ratio=math.nan):
        super().__init__(message)
        self.report = report
        self.ratio = ratio


@dataclass
class SolveReport:
    method: str
    iterations: int = 0
    increments: list = field(default_factory=list)
    converged: bool = False
    residuals: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    wall_time: float = 0.0
    notes: list = field(default_factory=list)
    phases: dict = field(default_factory=dict)

    @property
    def contraction_ratio(self):
        return contraction_ratio(self.increments)

    def summary(self):
        """Flat key -> value mapping for text reports."""
        out = {
            "method": self.method,
            "converged": "yes" if self.converged else "no",
            "iterations": self.iterations,
            "final_increment": f"{self.increments[-1]:.6e}" if self.increments else "n/a",
            "contraction_ratio": _fmt(self.contraction_ratio),
            "wall_time_s": f"{self.wall_time:.3f}",
        }
        for key, value in self.residuals.items():
            out[f"residual_{key}"] = _fmt(value)
        for name, sub in self.phases.items():
            for key, value in sub.summary().items():
                out[f"{name}.{key}"] = value
        for i, note in enumerate(self.notes):
            out[f"note_{i + 1}"] = note
        return out


def _fmt(v):
    return "n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6e}"


def contraction_ratio(increments, last=5):
    """Geometric mean of the last ``last`` ratios of consecutive increments."""
    inc = [v for v in increments if v > 0]
    if len(inc) < 2:
        return math.nan
    ratios = np.array(inc[1:]) / np.array(inc[:-1])
    tail = ratios[-last:]
    return float(np.exp(np.mean(np.log(tail))))


def _operators(spec, dom, ops, substeps, threads):
    grid = dom.grid if isinstance(dom, Domain) else dom
    if ops is None:
        a_min = dom.a_min if isinstance(dom, Domain) else 1e-6
        ops = IntegralOperators(spec, grid, substeps=substeps, a_min=a_min, threads=threads)
    elif ops.grid != grid:
        raise ValueError("operators were built for a different grid")
    return grid, ops


def _has_forcing(spec):
    return any(not (isinstance(f, Num) and f.value == 0.0) for f in spec.f)


def forcing_grid(spec, grid):
    return GridFunction.sample(grid, spec.f)


def affine_part(spec, ops):
    """Ff + boundary-data term, the inhomogeneity of the fixed-point equation."""
    rhs = ops.data()
    if _has_forcing(spec):
        rhs = rhs + ops.F(forcing_grid(spec, ops.grid))
    return rhs


def picard_solve(spec, dom, tol=1e-10, max_iters=500, u0=None, ops=None,
                 substeps=4, threads=1, grow_limit=10, rhs=None):
    """Successive substitution from ``u0`` (default 0) until the sup-norm
    increment drops below ``tol``.

    Raises :class:`DivergenceError` after ``grow_limit`` consecutive growing
    increments or when ``max_iters`` is exhausted.
    """
    start = time.perf_counter()
    grid, ops = _operators(spec, dom, ops, substeps, threads)
    report = SolveReport("picard")
    if rhs is None:
        rhs = affine_part(spec, ops)
    if u0 is None:
        u = GridFunction.zeros(grid, spec.n)
    elif isinstance(u0, GridFunction):
        u = u0.copy()
    else:
        u = GridFunction.full(grid, spec.n, u0)

    growing = 0
    for it in range(1, max_iters + 1):
        new = ops.C(u) + ops.D(u) + rhs
        if not np.all(np.isfinite(new.values)):
            report.iterations = it
            raise DivergenceError(f"non-finite values at iteration {it}", report)
        inc = (new - u).sup_norm()
        u = new
        report.increments.append(inc)
        report.iterations = it
        if inc < tol:
            report.converged = True
            break
        growing = growing + 1 if len(report.increments) > 1 and inc > report.increments[-2] else 0
        if growing >= grow_limit:
            ratio = report.contraction_ratio
            report.wall_time = time.perf_counter() - start
            raise DivergenceError(
                f"increments grew for {grow_limit} consecutive iterations "
                f"(growth ratio {ratio:.4g}); dissipativity or coupling decay likely fails",
                report, ratio)
    if not report.converged:
        report.wall_time = time.perf_counter() - start
        raise DivergenceError(f"no convergence in {max_iters} iterations "
                              f"(last increment {report.increments[-1]:.3e})",
                              report, report.contraction_ratio)
    fixed = u - ops.C(u) - ops.D(u) - rhs
    report.residuals["fixed_point"] = fixed.sup_norm()
    report.residuals["fixed_point_interior"] = fixed.interior_norm()
    report.wall_time = time.perf_counter() - start
    return u, report


# ---------------------------------------------------------------- marching


def _check_causal(ops):
    ahead = ops.max_lookahead()
    if ahead > 1e-6:
        raise SolverError(
            f"characteristics or boundary reads reach {ahead:.3g} rows into the future; "
            "marching needs a_j > 0 for j <= m, a_j < 0 for j > m and shifts <= 0")


class _Marcher:
    """Row update u(., t_r) = C u + D u + F f + data with all reads at rows <= r."""

    def __init__(self, spec, ops, fvals):
        self.spec, self.ops, self.fvals = spec, ops, fvals
        self.grid = ops.grid
        self.x = self.grid.x

    def integrand(self, j, r, values):
        geo = self.ops.geometry[j]
        rows = self.grid.rows
        pos = geo.pos[:, r]
        g = np.zeros(geo.pairs)
        if self.fvals is not None:
            g += gather(self.fvals[j].reshape(-1), rows, geo.pair_node, pos)
        for k in geo.sources:
            g -= geo.bval[k][:, r] * gather(values[k].reshape(-1), rows, geo.pair_node, pos)
        return g * geo.dval[:, r]

    def row(self, j, r, values, start=None):
        """New values of component j on row r.

        ``start = (r0, u0)`` truncates paths at the initial line t = t_{r0},
        where u0 (shape (n, nx+1)) is interpolated linearly in x.
        """
        ops, geo = self.ops, self.ops.geometry[j]
        g = self.integrand(j, r, values)
        full = geo.orient * np.add.reduceat(geo.weight * g, geo.starts) if geo.pairs \
            else np.zeros(self.grid.nx + 1)
        out = full + ops.row_C(values, r, j) + geo.data[:, r]
        if start is None:
            return out
        r0, u0 = start
        pos = geo.pos[:, r]
        keep = pos >= r0 - 1e-9
        kept = np.add.reduceat(keep.astype(np.intp), geo.starts)
        lengths = np.diff(np.append(geo.starts, geo.pairs))
        cut = np.nonzero(kept < lengths)[0]
        if cut.size == 0:
            return out
        dx = self.grid.dx
        q_in = geo.starts[cut] + kept[cut] - 1
        q_out = q_in + 1
        theta = (pos[q_in] - r0) / (pos[q_in] - pos[q_out])
        # trapezoid on the truncated path: interior nodes, last kept node, cut point
        w = np.where(keep, geo.weight, 0.0)
        w[q_in] = np.where(kept[cut] == 1, 0.5 * theta * dx, 0.5 * dx + 0.5 * theta * dx)
        xi = self.x[geo.pair_node[q_in]] + theta * geo.direction * dx
        t0 = self.grid.t[r0]
        d_cut = (1 - theta) * geo.dval[q_in, r] + theta * geo.dval[q_out, r]
        f_cut = np.broadcast_to(evaluate(self.spec.f[j], xi, t0), xi.shape)
        g_cut = np.array(f_cut, dtype=float)
        for k in geo.sources:
            b_cut = (1 - theta) * geo.bval[k][q_in, r] + theta * geo.bval[k][q_out, r]
            g_cut -= b_cut * np.interp(xi, self.x, u0[k])
        g_cut *= d_cut
        partial = geo.orient * (np.add.reduceat(w * g, geo.starts)[cut] + 0.5 * theta * dx * g_cut)
        c_cut = d_cut * evaluate(self.spec.a[j], xi, t0)
        out[cut] = partial + c_cut * np.interp(xi, self.x, u0[j])
        return out


def forward_march(spec, dom, initial, tol=1e-10, t0=None, ops=None, substeps=4,
                  threads=1, max_sweeps=50):
    """Solve the initial-boundary value problem forward from t0 (default -T).

    ``initial`` is either the trace at t0 (expressions in x, or an array of
    shape (n, nx+1)) or a :class:`GridFunction` used as history for all rows
    up to t0.  Each new row is resolved by Jacobi sweeps of the row update
    until the change is below ``tol / 10``.  Rows before t0 of the returned
    function hold the history, or the initial trace repeated.
    """
    start = time.perf_counter()
    grid, ops = _operators(spec, dom, ops, substeps, threads)
    _check_causal(ops)
    if t0 is None:
        t0 = -grid.T if math.isfinite(grid.T) else grid.t_min
    r0 = grid.row_of(t0)
    report = SolveReport("march")
    values = np.zeros((spec.n, grid.nx + 1, grid.rows))
    if isinstance(initial, GridFunction):
        if initial.grid != grid:
            raise ValueError("history lives on a different grid")
        values[:, :, :r0 + 1] = initial.values[:, :, :r0 + 1]
        start_line = None
        report.notes.append(f"history mode from t = {grid.t[r0]:.6g}")
    else:
        if isinstance(initial, (list, tuple)) and all(isinstance(e, (str, Expr)) for e in initial):
            u0 = np.stack([np.broadcast_to(evaluate(as_expr(e), grid.x, grid.t[r0]), grid.x.shape)
                           for e in initial])
        else:
            u0 = np.asarray(initial, dtype=float)
        if u0.shape != (spec.n, grid.nx + 1):
            raise ValueError(f"initial trace must have shape {(spec.n, grid.nx + 1)}")
        values[:, :, :r0 + 1] = u0[:, :, None]
        start_line = (r0, u0)
        report.notes.append(f"initial trace at t = {grid.t[r0]:.6g}")

    fvals = forcing_grid(spec, grid).values if _has_forcing(spec) else None
    marcher = _Marcher(spec, ops, fvals)
    sweep_tol = 0.1 * tol
    total_sweeps = 0
    for r in range(r0 + 1, grid.rows):
        values[:, :, r] = values[:, :, r - 1]
        for sweep in range(1, max_sweeps + 1):
            new = np.stack([marcher.row(j, r, values, start_line) for j in range(spec.n)])
            if not np.all(np.isfinite(new)):
                raise SolverError(f"non-finite values on row {r} (t = {grid.t[r]:.6g})")
            change = float(np.max(np.abs(new - values[:, :, r])))
            values[:, :, r] = new
            if change <= sweep_tol:
                break
        else:
            raise SolverError(f"row sweep did not converge on row {r} "
                              f"(t = {grid.t[r]:.6g}, last change {change:.3e})")
        total_sweeps += sweep
        report.increments.append(change)
    report.iterations = grid.rows - 1 - r0
    report.converged = True
    report.notes.append(f"{total_sweeps} row sweeps")
    report.wall_time = time.perf_counter() - start
    return GridFunction(grid, values), report


def two_phase_solve(spec, dom, tol=1e-10, max_iters=500, ops=None, substeps=4,
                    threads=1, t_split=None):
    """Picard on the rows t <= t_split (default -T), then march forward."""
    start = time.perf_counter()
    grid, ops = _operators(spec, dom, ops, substeps, threads)
    _check_causal(ops)
    if t_split is None:
        t_split = -grid.T if math.isfinite(grid.T) else 0.5 * (grid.t_min + grid.t_max)
    r_split = grid.row_of(t_split)
    if r_split < 1:
        raise ValueError("split time leaves no rows for the first phase")
    report = SolveReport("two-phase")

    left = ops.head(r_split)
    # smallness of the coupling on the left part (informative only)
    report.residuals["coupling_sup_left"] = _coupling_sup(spec, left.grid)
    rhs_left = affine_part(spec, left)
    try:
        u_left, rep1 = picard_solve(spec, left.grid, tol, max_iters, ops=left, rhs=rhs_left)
    except DivergenceError as exc:
        raise DivergenceError(f"phase 1 (t <= {grid.t[r_split]:.6g}) did not contract: {exc}",
                              exc.report, exc.ratio) from exc
    report.phases["phase1"] = rep1
    if not rep1.contraction_ratio < 1.0 and len(rep1.increments) > 2:
        raise DivergenceError("phase 1 is not contractive", rep1, rep1.contraction_ratio)

    history = GridFunction.zeros(grid, spec.n)
    history.values[:, :, :r_split + 1] = u_left.values
    u, rep2 = forward_march(spec, grid, history, tol, t0=grid.t[r_split], ops=ops)
    report.phases["phase2"] = rep2
    report.iterations = rep1.iterations + rep2.iterations
    report.increments = list(rep1.increments)
    report.converged = True
    report.wall_time = time.perf_counter() - start
    return u, report


def _coupling_sup(spec, grid: Grid):
    X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
    sup = 0.0
    for j in range(spec.n):
        for k in spec.offdiag(j):
            sup = max(sup, float(np.max(np.abs(evaluate(spec.b[j][k], X, T)))))
    return sup
