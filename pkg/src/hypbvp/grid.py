"""Space-time grids, sampled grid functions and the truncated computational domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import as_expr, evaluate


@dataclass(frozen=True)
class Grid:
    """Uniform grid: nx+1 columns on [0, 1] times nt+1 rows on [t_min, t_max].

    ``T`` is the half-width of the interior window [-T, T] on which errors and
    residuals are measured; it defaults to the full time range.
    """

    nx: int
    nt: int
    t_min: float
    t_max: float
    T: float = math.inf

    def __post_init__(self):
        if self.nx < 1 or self.nt < 1:
            raise ValueError("grid needs at least one cell in each direction")
        if not self.t_max > self.t_min:
            raise ValueError("empty time range")

    @property
    def dx(self):
        return 1.0 / self.nx

    @property
    def dt(self):
        return (self.t_max - self.t_min) / self.nt

    @property
    def rows(self):
        return self.nt + 1

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.nx + 1)

    @property
    def t(self):
        return np.linspace(self.t_min, self.t_max, self.nt + 1)

    @property
    def h(self):
        return max(self.dx, self.dt)

    def position(self, tau):
        """Fractional row index of time ``tau`` (unclamped)."""
        return (np.asarray(tau, dtype=float) - self.t_min) / self.dt

    def window_rows(self, window=None):
        """Boolean mask of rows with |t| <= window (default: T)."""
        w = self.T if window is None else window
        return np.abs(self.t) <= w + 1e-12 * max(1.0, abs(w))

    def row_of(self, tau):
        """Nearest row index to time ``tau``."""
        return int(np.clip(round(float(self.position(tau))), 0, self.nt))

    def head(self, last_row):
        """Sub-grid made of rows 0..last_row (same spacing)."""
        if not 1 <= last_row <= self.nt:
            raise ValueError(f"row {last_row} outside 1..{self.nt}")
        return Grid(self.nx, last_row, self.t_min,
                    self.t_min + last_row * self.dt, self.T)


def interp_rows(values, cols, pos):
    """Linear interpolation in t along fixed columns.

    ``values`` has shape (nx+1, rows); ``cols`` are integer column indices and
    ``pos`` fractional row positions (broadcast together).  Positions outside
    the stored rows are clamped to the first/last row.
    """
    nrows = values.shape[1]
    p = np.clip(pos, 0.0, nrows - 1)
    i0 = np.minimum(p.astype(np.intp), nrows - 2)
    frac = p - i0
    flat = values.reshape(-1)
    idx = np.asarray(cols, dtype=np.intp) * nrows + i0
    lo = flat[idx]
    hi = flat[idx + 1]
    return lo + frac * (hi - lo)


class GridFunction:
    """n-component function sampled on a :class:`Grid`.

    ``values`` has shape (n, nx+1, nt+1): component, x column, t row.
    """

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1:] != (grid.nx + 1, grid.nt + 1):
            raise ValueError(f"values of shape {values.shape} do not fit the grid "
                             f"({grid.nx + 1} x {grid.nt + 1})")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid, n):
        return cls(grid, np.zeros((n, grid.nx + 1, grid.nt + 1)))

    @classmethod
    def full(cls, grid, n, value):
        return cls(grid, np.full((n, grid.nx + 1, grid.nt + 1), float(value)))

    @classmethod
    def sample(cls, grid, exprs):
        """Sample expressions (one per component) at the grid points."""
        X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
        vals = np.stack([np.array(np.broadcast_to(evaluate(as_expr(e), X, T), X.shape), dtype=float) for e in exprs])
        return cls(grid, vals)

    @property
    def n(self):
        return self.values.shape[0]

    def copy(self):
        return GridFunction(self.grid, self.values.copy())

    def sup_norm(self, window=None):
        """Max of |values|; restricted to rows |t| <= window if given."""
        if window is None:
            return float(np.max(np.abs(self.values))) if self.values.size else 0.0
        mask = self.grid.window_rows(window)
        return float(np.max(np.abs(self.values[:, :, mask]))) if mask.any() else 0.0

    def interior_norm(self):
        return self.sup_norm(self.grid.T if math.isfinite(self.grid.T) else None)

    def at(self, j, col, tau):
        """Value of component j on column ``col`` at time(s) ``tau``."""
        out = interp_rows(self.values[j], col, self.grid.position(tau))
        return float(out) if np.ndim(out) == 0 else out

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self):
        g = self.grid
        return f"GridFunction(n={self.n}, nx={g.nx}, nt={g.nt}, t=[{g.t_min:g}, {g.t_max:g}])"


def _vals(other):
    return other.values if isinstance(other, GridFunction) else other


@dataclass(frozen=True)
class Domain:
    """Truncated strip [0,1] x [-T_pad, T_pad] with interior window [-T, T].

    ``T_pad = T + depth * (1/speed_floor + sigma_max)`` so that ``depth``
    boundary-to-boundary passes started inside [-T, T] stay on the grid.
    ``nt`` counts time intervals over the padded range.
    """

    T: float
    nx: int
    nt: int
    depth: int
    t_pad: float
    speed_floor: float
    sigma_max: float = 0.0
    a_min: float = 1e-6

    @classmethod
    def build(cls, spec, T, nx, nt, depth=3, a_min=1e-6):
        if T <= 0:
            raise ValueError("T must be positive")
        if depth < 1:
            raise ValueError("depth must be at least 1")
        sigma = spec.boundary.sigma_max
        floor = _speed_floor(spec, nx, nt, T)
        t_pad = T + depth * (1.0 / _pad_speed(floor, a_min) + sigma)
        # sampling the speeds on the enlarged range may lower the floor
        for _ in range(8):
            new_floor = min(floor, _speed_floor(spec, nx, nt, t_pad))
            new_pad = T + depth * (1.0 / _pad_speed(new_floor, a_min) + sigma)
            if new_pad <= t_pad * (1 + 1e-12):
                break
            floor, t_pad = new_floor, new_pad
        return cls(T, nx, nt, depth, t_pad, floor, sigma, a_min)

    @property
    def grid(self):
        return Grid(self.nx, self.nt, -self.t_pad, self.t_pad, self.T)

    def with_depth(self, depth):
        pad = self.T + depth * (1.0 / _pad_speed(self.speed_floor, self.a_min)
                                + self.sigma_max)
        # keep the time step of the original grid
        nt = max(1, int(round(self.nt * pad / self.t_pad)))
        return Domain(self.T, self.nx, nt, depth, pad, self.speed_floor,
                      self.sigma_max, self.a_min)


def _pad_speed(floor, a_min):
    # A degenerate speed makes every solve fail the hyperbolicity check anyway;
    # pad as for unit speed so the domain stays usable for diagnostics.
    return floor if floor >= a_min else 1.0


def sample_points(nx, nt, t_lo, t_hi):
    """Grid points plus cell midpoints, as flattened (x, t) arrays."""
    xs = np.linspace(0.0, 1.0, 2 * nx + 1)
    ts = np.linspace(t_lo, t_hi, 2 * nt + 1)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    return X.ravel(), T.ravel()


def _speed_floor(spec, nx, nt, half_width):
    X, T = sample_points(min(nx, 200), min(nt, 400), -half_width, half_width)
    lows = [float(np.min(np.abs(evaluate(a, X, T)))) for a in spec.a]
    return min(lows)
