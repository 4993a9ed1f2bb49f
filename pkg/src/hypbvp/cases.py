"""Built-in problems: the non-uniqueness example, closed-form transport
problems and manufactured-solution generators."""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Num, as_expr, diff, parse, subs
from .problem import ProblemSpec, ReflectionTerm

TAGS = ("unique-solvable", "kernel-nontrivial", "divergent")
CONDITIONS = ("smoothness", "hyperbolicity", "r-regularity", "factorization",
              "dissipativity", "coupling-decay")


@dataclass
class CaseDescriptor:
    name: str
    spec: ProblemSpec
    exact: tuple | None = None
    expected: dict = field(default_factory=dict)
    tag: str = "unique-solvable"
    domain: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        if self.exact is not None:
            self.exact = tuple(as_expr(e) for e in self.exact)
            if len(self.exact) != self.spec.n:
                raise ValueError("one exact expression per component required")


def _all_pass(**overrides):
    out = {c: "pass" for c in CONDITIONS}
    out.update(overrides)
    return out


def counterexample(l):
    """Two equal speeds 2/pi with antisymmetric coupling and zero boundary data.

    For every positive integer l the pair
    u1 = sin(pi x/2) sin(l(t - pi x/2)), u2 = cos(pi x/2) sin(l(t - pi x/2))
    solves the homogeneous problem.
    """
    if int(l) != l or l < 1:
        raise ValueError("l must be a positive integer")
    l = int(l)
    spec = ProblemSpec.build(
        2, 1, ["2/pi", "2/pi"], b={(0, 1): "-1", (1, 0): "1"},
        name=f"counterexample-l{l}")
    phase = f"sin({l}*(t - pi*x/2))"
    exact = (f"sin(pi*x/2)*{phase}", f"cos(pi*x/2)*{phase}")
    expected = _all_pass(hyperbolicity="fail", factorization="fail", **{"coupling-decay": "fail"})
    return CaseDescriptor(spec.name, spec, exact, expected, "kernel-nontrivial",
                          {"T": 6.283185307179586, "Nx": 200, "Nt": 200, "depth": 3},
                          description=f"bounded kernel function with frequency {l}")


def decoupled_transport(n, m, speeds, data, name="transport"):
    """Constant speeds, no coupling, Dirichlet data; exact solution by transport."""
    speeds = [float(a) for a in speeds]
    if len(speeds) != n or len(data) != n:
        raise ValueError("need one speed and one data expression per component")
    for j, a in enumerate(speeds):
        if a == 0 or (a > 0) != (j < m):
            raise ValueError(f"speed {a:g} of component {j + 1} has the wrong sign for m = {m}")
    spec = ProblemSpec.build(n, m, [Num(a) for a in speeds], mu=list(data), name=name)
    t, x = parse("t"), parse("x")
    exact = []
    for j, a in enumerate(speeds):
        xj = spec.anchor(j)
        exact.append(subs(as_expr(data[j]), t=t - (x - xj) / a))
    return CaseDescriptor(name, spec, tuple(exact), _all_pass(), "unique-solvable",
                          {"T": 2.0, "Nx": 100, "Nt": 100, "depth": 3},
                          description="decoupled transport with Dirichlet data")


def manufactured(spec_base, u_star, name=None):
    """Forcing and boundary data chosen so that ``u_star`` is the exact solution.

    f_j = d_t u*_j + a_j d_x u*_j + sum_k b_jk u*_k and
    mu_j(t) = u*_j(x_j, t) - sum_terms w(t) u*_k(side, t + shift).
    """
    n = spec_base.n
    u = tuple(as_expr(e) for e in u_star)
    if len(u) != n:
        raise ValueError("one expression per component required")
    f = []
    for j in range(n):
        fj = diff(u[j], "t") + spec_base.a[j] * diff(u[j], "x")
        for k in range(n):
            fj = fj + spec_base.b[j][k] * u[k]
        f.append(fj)
    t = parse("t")
    mu = []
    for j in range(n):
        mj = subs(u[j], x=spec_base.anchor(j))
        for term in spec_base.boundary.terms[j]:
            trace = subs(u[term.source], x=float(term.side), t=t + term.shift)
            mj = mj - term.weight * trace
        mu.append(mj)
    refl = {j: list(terms) for j, terms in enumerate(spec_base.boundary.terms) if terms}
    bmat = {(j, k): spec_base.b[j][k] for j in range(n) for k in range(n)}
    spec = ProblemSpec.build(n, spec_base.m, spec_base.a, b=bmat, f=f, mu=mu,
                             reflections=refl, btilde=spec_base.btilde,
                             name=name or spec_base.name or "manufactured")
    return CaseDescriptor(spec.name, spec, u, _all_pass(), "unique-solvable",
                          {"T": 2.0, "Nx": 100, "Nt": 100, "depth": 3},
                          description="manufactured solution")


def fade_in(t0, width=1.0):
    """Expression equal to 0 for t <= t0 - width and 1 for t >= t0."""
    return parse(f"1 - bump(t, {t0 - width!r}, {t0!r})")


def _reflection_scalar():
    # weight switched off in the far past so truncation errors cannot travel
    # into the window through repeated reflections
    w = parse("0.5") * fade_in(-2.5)
    base = ProblemSpec.build(1, 1, ["1"], reflections={0: [ReflectionTerm(0, w, 0.0, 1)]})
    case = manufactured(base, ["sin(t - x)"], "reflection-scalar")
    case.description = "unit transport with half reflection at x = 0"
    return case


def _manufactured_coupled():
    beta = "bump(t, 0.5, 1)*bump(-t, 0.5, 1)"
    a1, a2 = parse("1 + 0.2*sin(t + x)"), parse("-1 - 0.1*cos(t)")
    bt = parse(f"0.1*{beta}")
    base = ProblemSpec.build(
        2, 1, [a1, a2],
        b={(0, 1): bt * (a2 - a1), (1, 0): bt * (a1 - a2),
           (0, 0): "0.2", (1, 1): "0.1*sin(x)"},
        reflections={0: [ReflectionTerm(1, "0.3 + 0.05*sin(t)", 0.0, 0)]},
        btilde={(0, 1): bt, (1, 0): bt})
    case = manufactured(base, ["sin(t)*cos(x)", "sin(t)*cos(2*x)"], "manufactured-coupled")
    case.description = "variable speeds, coupling supported in |t| <= 1, partial reflection"
    return case


def _two_phase_coupled():
    beta = "bump(t, -6, -5)*bump(-t, 7, 7.5)"
    a1, a2 = parse("1.2 + 0.2*sin(t)"), parse("-1 - 0.2*cos(x + t)")
    bt = parse(f"0.1*{beta}")
    w = parse("0.3") * fade_in(-9.5)
    spec = ProblemSpec.build(
        2, 1, [a1, a2], b={(0, 1): bt * (a2 - a1), (1, 0): bt * (a1 - a2)},
        f=["0.2*cos(t + x)", "0"],
        mu=["sin(t)", "cos(2*t)"],
        reflections={0: [ReflectionTerm(1, w, 0.0, 0)], 1: [ReflectionTerm(0, w, 0.0, 1)]},
        btilde={(0, 1): bt, (1, 0): bt}, name="two-phase-coupled")
    return CaseDescriptor(spec.name, spec, None, _all_pass(), "unique-solvable",
                          {"T": 6.0, "Nx": 100, "Nt": 400, "depth": 3},
                          {"window": 8.0},
                          "coupling supported in [-7.5, -5], circular reflection")


def _divergent():
    spec = ProblemSpec.build(1, 1, ["1"], mu=["sin(t)"],
                             reflections={0: [ReflectionTerm(0, "1.5", 0.0, 1)]},
                             name="divergent")
    return CaseDescriptor(spec.name, spec, None, _all_pass(dissipativity="fail"), "divergent",
                          {"T": 2.0, "Nx": 50, "Nt": 50, "depth": 3},
                          description="amplifying reflection |w| = 1.5")


def _transport_scalar():
    return decoupled_transport(1, 1, [1.0], ["sin(t)"], "transport-scalar")


def _transport_pair():
    return decoupled_transport(2, 1, [1.0, -1.0], ["sin(t)", "cos(t)"], "transport-pair")


BUILTINS = {
    "counterexample-l1": lambda: counterexample(1),
    "counterexample-l2": lambda: counterexample(2),
    "counterexample-l3": lambda: counterexample(3),
    "transport-scalar": _transport_scalar,
    "transport-pair": _transport_pair,
    "reflection-scalar": _reflection_scalar,
    "manufactured-coupled": _manufactured_coupled,
    "two-phase-coupled": _two_phase_coupled,
    "divergent": _divergent,
}


def names():
    return list(BUILTINS)


def get(name):
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(BUILTINS)}") from None
