"""Reader and writer for the sectioned ``key = value`` problem format.

Example::

    [system]
    n = 2
    m = 1

    [speeds]
    a_1 = 1 + 0.2*sin(t)
    a_2 = -1

    [coupling]
    b_1_2 = 0.1*bump(t, -6, -5)     # b12 is accepted as well

    [boundary]
    mu_1 = sin(t)
    reflect_1 = from=2; weight=0.5; shift=0; side=0

    [domain]
    T = 2
    Nx = 100
    Nt = 100

Component indices are 1-based.  ``reflect_j`` may be repeated; each line
adds the term weight(t) * u_from(side, t + shift) to the boundary
condition of component j.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .expr import ExprError, Num, parse, to_text
from .problem import ProblemSpec, ReflectionTerm


class ProblemFileError(ValueError):
    def __init__(self, message, line=None, section=None, path=None):
        self.line, self.section, self.path = line, section, path
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if section:
            where.append(f"[{section}]")
        super().__init__((" ".join(where) + ": " if where else "") + message)


DOMAIN_KEYS = {"T": float, "Nx": int, "Nt": int, "depth": int}
SOLVER_KEYS = {"tol": float, "max_iters": int, "mode": str, "ell": int,
               "substeps": int, "a_min": float}
CHECK_KEYS = {"eps": float, "window": float, "factor_tol": float, "factor_bound": float}
MODES = ("picard", "two-phase", "march")
SECTIONS = ("system", "speeds", "coupling", "factorization", "forcing", "boundary",
            "domain", "solver", "checks")

DEFAULT_DOMAIN = {"T": 2.0, "Nx": 100, "Nt": 100, "depth": 3}
DEFAULT_SOLVER = {"tol": 1e-10, "max_iters": 500, "mode": "picard", "ell": 8,
                  "substeps": 4, "a_min": 1e-6}


@dataclass
class ProblemFile:
    spec: ProblemSpec
    domain: dict = field(default_factory=lambda: dict(DEFAULT_DOMAIN))
    solver: dict = field(default_factory=lambda: dict(DEFAULT_SOLVER))
    checks: dict = field(default_factory=dict)
    path: str | None = None


_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _strip_comment(line):
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_text(text, path=None):
    """Parse problem-file text into a :class:`ProblemFile`."""
    entries = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ProblemFileError(f"unknown section [{section}]", lineno, None, path)
            continue
        m = _ENTRY.match(line)
        if not m:
            raise ProblemFileError(f"expected 'key = value', got {line!r}", lineno, section, path)
        if section is None:
            raise ProblemFileError("entry before the first section", lineno, None, path)
        entries.append((lineno, section, m.group(1), m.group(2).strip()))
    return _build(entries, path)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), str(path))


def _index_pair(key, prefix, n, err):
    body = key[len(prefix):]
    if body.startswith("_"):
        parts = body[1:].split("_")
    elif body.isdigit() and len(body) == 2:
        parts = [body[0], body[1]]
    else:
        raise err(f"malformed key {key!r}; use {prefix}_j_k")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise err(f"malformed key {key!r}; use {prefix}_j_k")
    j, k = int(parts[0]), int(parts[1])
    for v in (j, k):
        if not 1 <= v <= n:
            raise err(f"component index {v} outside 1..{n}")
    return j - 1, k - 1


def _index(key, prefix, n, err):
    body = key[len(prefix):].lstrip("_")
    if not body.isdigit():
        raise err(f"malformed key {key!r}; use {prefix}_j")
    j = int(body)
    if not 1 <= j <= n:
        raise err(f"component index {j} outside 1..{n}")
    return j - 1


def _reflection(value, n, err):
    fields = {}
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise err(f"reflection field {part!r} is not 'name=value'")
        name, val = (s.strip() for s in part.split("=", 1))
        if name not in ("from", "weight", "shift", "side"):
            raise err(f"unknown reflection field {name!r}")
        fields[name] = val
    if "from" not in fields or "weight" not in fields:
        raise err("reflection needs 'from' and 'weight'")
    try:
        k = int(fields["from"])
        shift = float(fields.get("shift", 0.0))
        side = int(fields.get("side", 0))
    except ValueError as exc:
        raise err(f"bad reflection field: {exc}") from None
    if not 1 <= k <= n:
        raise err(f"component index {k} outside 1..{n}")
    if side not in (0, 1):
        raise err("side must be 0 or 1")
    return ReflectionTerm(k - 1, _expr(fields["weight"], err), shift, side)


def _expr(src, err):
    try:
        return parse(src)
    except ExprError as exc:
        raise err(f"bad expression {src!r}: {exc}") from None


def _typed(value, kind, key, err):
    try:
        return kind(value)
    except ValueError:
        raise err(f"{key} must be of type {kind.__name__}, got {value!r}") from None


def _build(entries, path):
    def error_at(lineno, section):
        return lambda msg: ProblemFileError(msg, lineno, section, path)

    system = {}
    for lineno, section, key, value in entries:
        if section == "system":
            err = error_at(lineno, section)
            if key not in ("n", "m", "name"):
                raise err(f"unknown key {key!r}")
            if key in system:
                raise err(f"duplicate key {key!r}")
            system[key] = value if key == "name" else _typed(value, int, key, err)
    if "n" not in system or "m" not in system:
        raise ProblemFileError("[system] must define n and m", None, "system", path)
    n, m = system["n"], system["m"]
    if n < 1 or not 0 <= m <= n:
        raise ProblemFileError(f"need n >= 1 and 0 <= m <= n (n={n}, m={m})", None, "system", path)

    a, b, bt, f, mu, refl = {}, {}, {}, {}, {}, {}
    domain, solver, checks = dict(DEFAULT_DOMAIN), dict(DEFAULT_SOLVER), {}
    seen = set()
    for lineno, section, key, value in entries:
        err = error_at(lineno, section)
        if section == "system":
            continue
        if not key.startswith("reflect"):
            if (section, key) in seen:
                raise err(f"duplicate key {key!r}")
            seen.add((section, key))
        if section == "speeds":
            if not key.startswith("a"):
                raise err(f"unknown key {key!r}")
            a[_index(key, "a", n, err)] = _expr(value, err)
        elif section == "coupling":
            if not key.startswith("b"):
                raise err(f"unknown key {key!r}")
            b[_index_pair(key, "b", n, err)] = _expr(value, err)
        elif section == "factorization":
            if not key.startswith("bt"):
                raise err(f"unknown key {key!r}")
            j, k = _index_pair(key, "bt", n, err)
            if j == k:
                raise err("factorization entries must be off-diagonal")
            bt[(j, k)] = _expr(value, err)
        elif section == "forcing":
            if not key.startswith("f"):
                raise err(f"unknown key {key!r}")
            f[_index(key, "f", n, err)] = _expr(value, err)
        elif section == "boundary":
            if key.startswith("mu"):
                mu[_index(key, "mu", n, err)] = _expr(value, err)
            elif key.startswith("reflect"):
                j = _index(key, "reflect", n, err)
                refl.setdefault(j, []).append(_reflection(value, n, err))
            else:
                raise err(f"unknown key {key!r}")
        else:
            table = {"domain": DOMAIN_KEYS, "solver": SOLVER_KEYS, "checks": CHECK_KEYS}[section]
            target = {"domain": domain, "solver": solver, "checks": checks}[section]
            if key not in table:
                raise err(f"unknown key {key!r}")
            target[key] = _typed(value, table[key], key, err)
            if key == "mode" and value not in MODES:
                raise err(f"mode must be one of {', '.join(MODES)}")

    missing = [j + 1 for j in range(n) if j not in a]
    if missing:
        raise ProblemFileError(f"missing speed(s) a_{missing[0]}", None, "speeds", path)
    spec = ProblemSpec.build(n, m, [a[j] for j in range(n)], b=b, f=f, mu=mu,
                             reflections=refl, btilde=bt, name=system.get("name", ""))
    return ProblemFile(spec, domain, solver, checks, path)


def _is_zero(e):
    return isinstance(e, Num) and e.value == 0.0


def dumps(pf: ProblemFile):
    """Problem-file text for ``pf`` (round-trips through :func:`parse_text`)."""
    spec = pf.spec
    out = ["[system]", f"n = {spec.n}", f"m = {spec.m}"]
    if spec.name:
        out.append(f"name = {spec.name}")
    out += ["", "[speeds]"] + [f"a_{j + 1} = {to_text(e)}" for j, e in enumerate(spec.a)]
    coupling = [f"b_{j + 1}_{k + 1} = {to_text(spec.b[j][k])}"
                for j in range(spec.n) for k in range(spec.n) if not _is_zero(spec.b[j][k])]
    if coupling:
        out += ["", "[coupling]"] + coupling
    if spec.btilde:
        out += ["", "[factorization]"] + [f"bt_{j + 1}_{k + 1} = {to_text(e)}"
                                          for (j, k), e in sorted(spec.btilde.items())]
    forcing = [f"f_{j + 1} = {to_text(e)}" for j, e in enumerate(spec.f) if not _is_zero(e)]
    if forcing:
        out += ["", "[forcing]"] + forcing
    out += ["", "[boundary]"]
    for j in range(spec.n):
        out.append(f"mu_{j + 1} = {to_text(spec.boundary.data[j])}")
        for term in spec.boundary.terms[j]:
            out.append(f"reflect_{j + 1} = from={term.source + 1}; weight={to_text(term.weight)}; "
                       f"shift={term.shift!r}; side={term.side}")
    out += ["", "[domain]"] + [f"{k} = {v!r}" for k, v in pf.domain.items()]
    out += ["", "[solver]"] + [f"{k} = {v}" if isinstance(v, str) else f"{k} = {v!r}"
                               for k, v in pf.solver.items()]
    if pf.checks:
        out += ["", "[checks]"] + [f"{k} = {v!r}" for k, v in pf.checks.items()]
    return "\n".join(out) + "\n"


def save(pf, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(pf))
