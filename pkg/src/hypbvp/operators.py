"""Grid realizations of the boundary operator R and the integral operators C, D, F.

For u on a grid and component j with boundary abscissa x_j::

    (Cv)_j(x,t) = c_j(x_j; x,t) * (R_lin v)_j(omega_j(x_j))
    (Du)_j(x,t) = -int_{x_j}^x d_j(xi; x,t) sum_{k!=j} b_jk(xi, omega_j) u_k(xi, omega_j) d xi
    (Ff)_j(x,t) =  int_{x_j}^x d_j(xi; x,t) f_j(xi, omega_j) d xi

The characteristic nodes are the grid columns, the xi-quadrature is the
composite trapezoid rule and grid values are interpolated linearly in t
along a column (clamped outside the stored rows).  The affine part of R
(the boundary data mu) is kept apart as :meth:`IntegralOperators.data`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .characteristics import DomainExitError, advance, speed
from .expr import evaluate
from .grid import GridFunction, interp_rows
from . import _fan
from .kernels import damping_rate, log_weight_step

# keep temporaries of the blocked operator application near this many entries
_BLOCK = 2_000_000


@dataclass
class NodeBatch:
    """State of a batch of characteristics after ``step`` node intervals.

    Arrays cover the ``count`` still-active paths (a prefix of the sorted
    batch); ``done`` selects those whose path ends at this node (x = x_j).
    """

    step: int
    count: int
    done: slice
    col: np.ndarray
    omega: np.ndarray
    a: np.ndarray
    logc: np.ndarray
    steps: np.ndarray

    @property
    def d(self):
        return np.exp(self.logc) / self.a


class Sweep:
    """March characteristics of component j from grid-column anchors toward x_j.

    Anchors are ``(cols[e], times[e])``.  Internally the batch is sorted by
    path length (longest first) so the active set is always a prefix; use
    :attr:`order` to map back.
    """

    def __init__(self, spec, grid, j, cols, times, substeps=4, a_min=1e-6):
        self.spec, self.grid, self.j = spec, grid, j
        self.substeps, self.a_min = substeps, a_min
        self.target = 0 if j < spec.m else grid.nx
        self.direction = -1 if self.target == 0 else 1
        self.orient = 1.0 if self.target == 0 else -1.0
        cols = np.asarray(cols, dtype=np.intp)
        steps = np.abs(cols - self.target)
        self.order = np.argsort(-steps, kind="stable")
        self.steps = steps[self.order]
        self.cols = cols[self.order]
        self.times = np.asarray(times, dtype=float)[self.order]
        self._neg = -self.steps

    def count_ge(self, s):
        return int(np.searchsorted(self._neg, -s, side="right"))

    def weights(self, batch):
        """Trapezoid weights of the current nodes on their own paths."""
        dx = self.grid.dx
        w = np.full(batch.count, dx)
        w[(batch.step == 0) | (batch.steps == batch.step)] = 0.5 * dx
        w[batch.steps == 0] = 0.0
        return w

    def __iter__(self):
        spec, g, j = self.spec, self.grid, self.j
        col = self.cols.copy()
        omega = self.times.copy()
        xi = g.x[col]
        a = np.array(speed(spec, j, xi, omega, self.a_min), dtype=float)
        rate = np.array(np.broadcast_to(damping_rate(spec, j, xi, omega), a.shape), dtype=float)
        logc = np.zeros_like(omega)
        count = len(col)
        smax = int(self.steps[0]) if count else -1
        h = self.direction * g.dx
        for s in range(smax + 1):
            if s > 0:
                count = self.count_ge(s)
                xi_old = g.x[col[:count]]
                omega[:count] = advance(spec, j, xi_old, omega[:count], h,
                                        self.substeps, self.a_min)
                col[:count] += self.direction
                xi_new = g.x[col[:count]]
                a_new = speed(spec, j, xi_new, omega[:count], self.a_min)
                rate_new = damping_rate(spec, j, xi_new, omega[:count])
                logc[:count] += log_weight_step(rate[:count], rate_new, h)
                a[:count] = a_new
                rate[:count] = rate_new
            yield NodeBatch(s, count, slice(self.count_ge(s + 1), count),
                            col[:count], omega[:count], a[:count], logc[:count],
                            self.steps[:count])

    def unsort(self, values):
        out = np.empty_like(values)
        out[self.order] = values
        return out


def line_integral(spec, grid, j, cols, times, integrand, substeps=4, a_min=1e-6):
    """int_{x_j}^{x} d_j(xi; x, t) integrand(batch) d xi for each anchor.

    ``integrand`` maps a :class:`NodeBatch` to values at its nodes.
    """
    sweep = Sweep(spec, grid, j, cols, times, substeps, a_min)
    acc = np.zeros(len(sweep.cols))
    for batch in sweep:
        if batch.count == 0:
            continue
        acc[:batch.count] += sweep.weights(batch) * batch.d * integrand(batch)
    return sweep.orient * sweep.unsort(acc)


def _interp_at(u_values, k, batch, grid):
    return interp_rows(u_values[k], batch.col, grid.position(batch.omega))


def coupling_sum(spec, u_values, j, batch, grid):
    """sum_{k != j} b_jk(xi, omega) u_k(xi, omega) at the batch nodes."""
    xi = grid.x[batch.col]
    total = np.zeros(batch.count)
    for k in spec.offdiag(j):
        total += evaluate(spec.b[j][k], xi, batch.omega) * _interp_at(u_values, k, batch, grid)
    return total


def _anchors(grid):
    cols = np.repeat(np.arange(grid.nx + 1), grid.rows)
    times = np.tile(grid.t, grid.nx + 1)
    return cols, times


class Geometry:
    """Cached characteristic fan of component j through every grid point.

    Pair p = (anchor column, node) indexes the first axis of arrays of shape
    (P, rows); pairs of one anchor column form a contiguous block.
    """

    def __init__(self, spec, grid, j, substeps=4, a_min=1e-6, fan=True):
        self.j = j
        self.fan = fan
        nx, rows = grid.nx, grid.rows
        self.target = 0 if j < spec.m else nx
        self.direction = -1 if self.target == 0 else 1
        self.orient = 1.0 if self.target == 0 else -1.0
        self.sources = spec.offdiag(j)

        lengths = np.abs(np.arange(nx + 1) - self.target) + 1
        self.starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.intp)
        P = int(lengths.sum())
        self.ends = _fan.block_ends(self.starts, P)
        self.pair_anchor = np.repeat(np.arange(nx + 1), lengths)
        self.pair_step = np.arange(P) - self.starts[self.pair_anchor]
        self.pair_node = self.pair_anchor + self.direction * self.pair_step
        last = self.pair_step == (lengths - 1)[self.pair_anchor]
        w = np.full(P, grid.dx)
        w[(self.pair_step == 0) | last] = 0.5 * grid.dx
        w[lengths[self.pair_anchor] == 1] = 0.0
        self.weight = w

        # without the fan only the path end points are kept (enough for C)
        shape = (P, rows) if fan else (0, rows)
        self.pos = np.empty(shape)
        self.dval = np.empty(shape)
        self.bstack = np.empty((len(self.sources),) + shape)
        self.bval = dict(zip(self.sources, self.bstack))
        self.end_omega = np.empty((nx + 1, rows))
        self.end_logc = np.empty((nx + 1, rows))
        self.min_speed = np.inf

        cols, times = _anchors(grid)
        sweep = Sweep(spec, grid, j, cols, times, substeps, a_min)
        anchor_col = sweep.cols
        anchor_row = sweep.order % rows
        xs = grid.x
        for batch in sweep:
            n = batch.count
            if n == 0:
                continue
            if fan:
                prow = anchor_row[:n]
                pidx = self.starts[anchor_col[:n]] + batch.step
                self.pos[pidx, prow] = _snap(grid.position(batch.omega))
                self.dval[pidx, prow] = batch.d
                xi = xs[batch.col]
                for k in self.sources:
                    self.bval[k][pidx, prow] = evaluate(spec.b[j][k], xi, batch.omega)
            self.min_speed = min(self.min_speed, float(np.min(np.abs(batch.a))))
            done = batch.done
            self.end_omega[anchor_col[done], anchor_row[done]] = batch.omega[done]
            self.end_logc[anchor_col[done], anchor_row[done]] = batch.logc[done]

        # boundary reads: coefficient * v_k(side, omega_end + shift)
        end_c = np.exp(self.end_logc)
        self.reads = []
        for term in spec.boundary.terms[j]:
            coef = end_c * evaluate(term.weight, 0.0, self.end_omega)
            side_col = 0 if term.side == 0 else nx
            read_pos = _snap(grid.position(self.end_omega + term.shift))
            self.reads.append((term.source, side_col, coef, read_pos))
        self.data = end_c * evaluate(spec.boundary.data[j], 0.0, self.end_omega)

    @property
    def pairs(self):
        return self.pos.shape[0]

    def head(self, rows):
        """View of the cached data restricted to the first ``rows`` rows."""
        out = object.__new__(Geometry)
        out.__dict__.update(self.__dict__)
        out.pos, out.dval = self.pos[:, :rows], self.dval[:, :rows]
        out.bstack = self.bstack[:, :, :rows]
        out.bval = dict(zip(self.sources, out.bstack))
        out.end_omega, out.end_logc = self.end_omega[:, :rows], self.end_logc[:, :rows]
        out.reads = [(k, side, coef[:, :rows], pos[:, :rows]) for k, side, coef, pos in self.reads]
        out.data = self.data[:, :rows]
        return out

    def d_row_sums(self):
        """sum_p w |d| sum_k |b_jk| per grid point: the rows of |D_j| summed."""
        nx1, rows = self.end_omega.shape
        if not self.sources or not self.pairs:
            return np.zeros((nx1, rows))
        acc = np.zeros_like(self.pos)
        for k in self.sources:
            acc += np.abs(self.bval[k])
        acc *= np.abs(self.dval) * self.weight[:, None]
        return np.add.reduceat(acc, self.starts, axis=0)

    def max_lookahead(self):
        """Largest (read row - anchor row) over all stored nodes and boundary reads."""
        rows = self.pos.shape[1]
        ahead = float(np.max(self.pos - np.arange(rows)[None, :])) if self.pairs else 0.0
        for _, _, _, read_pos in self.reads:
            ahead = max(ahead, float(np.max(read_pos - np.arange(rows)[None, :])))
        return ahead


def _snap(pos, eps=1e-9):
    # round-off must not pull weight from the next (not yet known) row
    r = np.rint(pos)
    return np.where(np.abs(pos - r) < eps, r, pos)


def gather(u_flat, rows, node, pos):
    p = np.clip(pos, 0.0, rows - 1)
    i0 = np.minimum(p.astype(np.intp), rows - 2)
    frac = p - i0
    idx = node * rows + i0
    lo = u_flat[idx]
    return lo + frac * (u_flat[idx + 1] - lo)


class IntegralOperators:
    """C, D, F and the boundary-data term for one problem on one grid."""

    def __init__(self, spec, grid, substeps=4, a_min=1e-6, threads=1, fan=True):
        self.spec, self.grid = spec, grid
        self.substeps, self.a_min = substeps, a_min
        self.threads = max(1, int(threads))
        self.fan = fan
        self.geometry = self._map(lambda j: Geometry(spec, grid, j, substeps, a_min, fan),
                                  range(spec.n))

    def head(self, last_row):
        """Operators on ``grid.head(last_row)``, sharing the cached geometry.

        Only valid when no characteristic reads later rows (see
        :meth:`max_lookahead`).
        """
        out = object.__new__(IntegralOperators)
        out.__dict__.update(self.__dict__)
        out.grid = self.grid.head(last_row)
        out.geometry = [geo.head(last_row + 1) for geo in self.geometry]
        return out

    def _map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) == 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    # ---- whole-grid applications

    def _check(self, u):
        if u.grid != self.grid:
            raise ValueError("grid function lives on a different grid")

    def C(self, v):
        self._check(v)
        out = np.zeros_like(v.values)
        for j, geo in enumerate(self.geometry):
            for k, side_col, coef, read_pos in geo.reads:
                out[j] += coef * interp_rows(v.values[k], side_col, read_pos)
        return GridFunction(self.grid, out)

    def data(self):
        """Boundary-data part c_j(x_j; x, t) mu_j(omega_j(x_j))."""
        return GridFunction(self.grid, np.stack([geo.data for geo in self.geometry]))

    def _apply_rows(self, geo, fn):
        rows = self.grid.rows
        out = np.empty((self.grid.nx + 1, rows))
        step = max(1, _BLOCK // max(geo.pairs, 1))
        for r0 in range(0, rows, step):
            r1 = min(rows, r0 + step)
            out[:, r0:r1] = np.add.reduceat(fn(r0, r1), geo.starts, axis=0)
        return out

    def _need_fan(self):
        if not self.fan:
            raise RuntimeError("operators were built without the characteristic fan")

    def _D_component(self, geo, u_values):
        rows = self.grid.rows
        if not geo.sources:
            return np.zeros((self.grid.nx + 1, rows))
        if _fan.AVAILABLE:
            out = np.empty((self.grid.nx + 1, rows))
            src = np.ascontiguousarray(u_values[geo.sources])
            _fan.coupled_sum(geo.starts, geo.ends, geo.pair_node, geo.weight, geo.pos,
                             geo.dval, geo.bstack, src, out)
            return -geo.orient * out
        flats = {k: u_values[k].reshape(-1) for k in geo.sources}

        def block(r0, r1):
            pos = geo.pos[:, r0:r1]
            acc = np.zeros_like(pos)
            for k in geo.sources:
                acc += geo.bval[k][:, r0:r1] * gather(flats[k], rows, geo.pair_node[:, None], pos)
            return acc * geo.dval[:, r0:r1] * geo.weight[:, None]

        return -geo.orient * self._apply_rows(geo, block)

    def D(self, u):
        self._check(u)
        self._need_fan()
        parts = self._map(lambda j: self._D_component(self.geometry[j], u.values),
                          range(self.spec.n))
        return GridFunction(self.grid, np.stack(parts))

    def F(self, f):
        self._check(f)
        self._need_fan()
        rows = self.grid.rows

        def comp(j):
            geo = self.geometry[j]
            if _fan.AVAILABLE:
                out = np.empty((self.grid.nx + 1, rows))
                _fan.plain_sum(geo.starts, geo.ends, geo.pair_node, geo.weight, geo.pos,
                               geo.dval, np.ascontiguousarray(f.values[j]), out)
                return geo.orient * out
            flat = f.values[j].reshape(-1)

            def block(r0, r1):
                vals = gather(flat, rows, geo.pair_node[:, None], geo.pos[:, r0:r1])
                return vals * geo.dval[:, r0:r1] * geo.weight[:, None]

            return geo.orient * self._apply_rows(geo, block)

        return GridFunction(self.grid, np.stack(self._map(comp, range(self.spec.n))))

    def linear(self, u):
        """C u + D u."""
        return self.C(u) + self.D(u)

    # ---- single-row applications (time marching)

    def row_C(self, values, row, j):
        geo = self.geometry[j]
        out = np.zeros(self.grid.nx + 1)
        for k, side_col, coef, read_pos in geo.reads:
            out += coef[:, row] * interp_rows(values[k], side_col, read_pos[:, row])
        return out

    def row_D(self, values, row, j):
        geo = self.geometry[j]
        if not geo.sources:
            return np.zeros(self.grid.nx + 1)
        rows = self.grid.rows
        pos = geo.pos[:, row]
        acc = np.zeros_like(pos)
        for k in geo.sources:
            acc += geo.bval[k][:, row] * gather(values[k].reshape(-1), rows, geo.pair_node, pos)
        return -geo.orient * np.add.reduceat(acc * geo.dval[:, row] * geo.weight, geo.starts)

    def max_lookahead(self):
        return max(geo.max_lookahead() for geo in self.geometry)

    def d_norm_bound(self, window=None):
        """Max row sum of |D| over the rows with |t| <= window (default T)."""
        self._need_fan()
        mask = self.grid.window_rows(window) if window is not None or np.isfinite(self.grid.T) \
            else np.ones(self.grid.rows, bool)
        sums = [geo.d_row_sums()[:, mask] for geo in self.geometry]
        return max((float(s.max()) for s in sums if s.size), default=0.0)

    # ---- sparse form of C (norm estimation)

    def c_matrix(self):
        """C as a sparse matrix acting on ``values.reshape(-1)``."""
        from scipy.sparse import csr_matrix

        nx1, rows, n = self.grid.nx + 1, self.grid.rows, self.spec.n
        size = n * nx1 * rows
        out_idx = np.arange(nx1 * rows).reshape(nx1, rows)
        r_all, c_all, v_all = [], [], []
        for j, geo in enumerate(self.geometry):
            for k, side_col, coef, read_pos in geo.reads:
                p = np.clip(read_pos, 0.0, rows - 1)
                i0 = np.minimum(p.astype(np.intp), rows - 2)
                frac = p - i0
                src = (k * nx1 + side_col) * rows + i0
                dst = j * nx1 * rows + out_idx
                r_all += [dst.ravel(), dst.ravel()]
                c_all += [src.ravel(), src.ravel() + 1]
                v_all += [(coef * (1.0 - frac)).ravel(), (coef * frac).ravel()]
        if not r_all:
            return csr_matrix((size, size))
        return csr_matrix((np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
                          shape=(size, size))


# ------------------------------------------------------------ module API


def apply_R(spec, u, j, t, linear_only=False):
    """(Ru)_j(t); raises if a shifted read leaves the stored time range."""
    g = u.grid
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t) if linear_only else np.array(
        evaluate(spec.boundary.data[j], 0.0, t), dtype=float)
    for term in spec.boundary.terms[j]:
        tau = t + term.shift
        if np.any(tau < g.t_min - 1e-12) or np.any(tau > g.t_max + 1e-12):
            raise DomainExitError(f"boundary read at t + {term.shift:g} leaves "
                                  f"[{g.t_min:g}, {g.t_max:g}]")
        side_col = 0 if term.side == 0 else g.nx
        out = out + evaluate(term.weight, 0.0, t) * u.at(term.source, side_col, tau)
    return float(out) if out.ndim == 0 else out


def apply_C(spec, v, substeps=4):
    return IntegralOperators(spec, v.grid, substeps).C(v)


def apply_D(spec, u, substeps=4):
    return IntegralOperators(spec, u.grid, substeps).D(u)


def apply_F(spec, f, substeps=4):
    return IntegralOperators(spec, f.grid, substeps).F(f)


def apply_D_direct(spec, u, j, cols, times, substeps=4):
    """(Du)_j at arbitrary anchors on grid columns, traced afresh (no cache)."""
    g = u.grid
    integral = line_integral(spec, g, j, cols, times,
                             lambda batch: coupling_sum(spec, u.values, j, batch, g),
                             substeps)
    return -integral


def apply_D2_direct(spec, u, substeps=4):
    """D^2 u as a double integral over the characteristic triangle.

    The inner integral (Du)_k is evaluated exactly at the outer node
    (xi, omega_j(xi)) by tracing the k-th characteristic from there, instead
    of interpolating a gridded Du in t.
    """
    g = u.grid
    cols, times = _anchors(g)
    out = np.zeros_like(u.values)
    for j in range(spec.n):
        sources = spec.offdiag(j)
        if not sources:
            continue
        sweep = Sweep(spec, g, j, cols, times, substeps)
        acc = np.zeros(len(cols))
        for batch in sweep:
            n = batch.count
            if n == 0:
                continue
            w = sweep.weights(batch)
            live = w > 0
            if not live.any():
                continue
            xi = g.x[batch.col[live]]
            tau = batch.omega[live]
            inner = np.zeros(int(live.sum()))
            for k in sources:
                dk = apply_D_direct(spec, u, k, batch.col[live], tau, substeps)
                inner += evaluate(spec.b[j][k], xi, tau) * dk
            acc[:n][live] += w[live] * batch.d[live] * inner
        out[j] = (-sweep.orient * sweep.unsort(acc)).reshape(g.nx + 1, g.rows)
    return GridFunction(g, out)
