"""Problem description: speeds, couplings, forcing and the boundary operator.

Components are indexed from 0 in the Python API.  The first ``m`` components
travel to the right (positive speed) and take their boundary value at x = 0;
the remaining ``n - m`` travel to the left and take it at x = 1.  Problem
files and printed reports use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Expr, Num, as_expr

ZERO = Num(0.0)


@dataclass(frozen=True)
class ReflectionTerm:
    """One term ``weight(t) * u_source(side, t + shift)`` of the boundary operator."""

    source: int
    weight: Expr
    shift: float = 0.0
    side: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weight", as_expr(self.weight))
        if self.side not in (0, 1):
            raise ValueError(f"side must be 0 or 1, got {self.side!r}")


@dataclass(frozen=True)
class BoundaryOperatorSpec:
    """Affine boundary operator (Ru)_j(t) = mu_j(t) + sum_terms w(t) u_k(side, t + shift)."""

    data: tuple
    terms: tuple

    @classmethod
    def build(cls, n, data=None, terms=None):
        data = data or {}
        terms = terms or {}
        mu = tuple(as_expr(data.get(j, ZERO)) for j in range(n))
        refl = tuple(tuple(terms.get(j, ())) for j in range(n))
        return cls(mu, refl)

    @property
    def n(self):
        return len(self.data)

    @property
    def sigma_max(self):
        shifts = [abs(term.shift) for row in self.terms for term in row]
        return max(shifts, default=0.0)

    @property
    def has_reflection(self):
        return any(self.terms)


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    m: int
    a: tuple
    b: tuple
    f: tuple
    boundary: BoundaryOperatorSpec
    btilde: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.m <= self.n:
            raise ValueError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")
        if len(self.a) != self.n or len(self.f) != self.n or len(self.b) != self.n:
            raise ValueError("coefficient lists must have length n")
        if any(len(row) != self.n for row in self.b):
            raise ValueError("coupling matrix must be n x n")
        if self.boundary.n != self.n:
            raise ValueError("boundary operator has wrong component count")
        for j, row in enumerate(self.boundary.terms):
            for term in row:
                if not 0 <= term.source < self.n:
                    raise ValueError(f"reflection term for component {j} reads "
                                     f"unknown component {term.source}")
        for (j, k) in self.btilde:
            if j == k or not (0 <= j < self.n and 0 <= k < self.n):
                raise ValueError(f"factorization entry ({j}, {k}) is not off-diagonal")

    @classmethod
    def build(cls, n, m, a, b=None, f=None, mu=None, reflections=None,
              btilde=None, name=""):
        """Convenience constructor; ``b``/``btilde`` map (j, k) to expressions."""
        b = b or {}
        f = f or {}
        if isinstance(f, (list, tuple)):
            f = dict(enumerate(f))
        if isinstance(mu, (list, tuple)):
            mu = dict(enumerate(mu))
        a = tuple(as_expr(v) for v in a)
        bmat = tuple(tuple(as_expr(b.get((j, k), ZERO)) for k in range(n))
                     for j in range(n))
        fvec = tuple(as_expr(f.get(j, ZERO)) for j in range(n))
        boundary = BoundaryOperatorSpec.build(n, mu, reflections)
        bt = {key: as_expr(v) for key, v in (btilde or {}).items()}
        return cls(n, m, a, bmat, fvec, boundary, bt, name)

    def anchor(self, j):
        """Boundary abscissa x_j where component j receives its boundary value."""
        return 0.0 if j < self.m else 1.0

    def offdiag(self, j):
        """Indices k != j with a coupling coefficient that is not identically zero."""
        return [k for k in range(self.n)
                if k != j and not (isinstance(self.b[j][k], Num) and self.b[j][k].value == 0.0)]

    @property
    def coupled(self):
        return any(self.offdiag(j) for j in range(self.n))
