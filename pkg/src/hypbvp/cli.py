"""Command-line front end.

Exit codes: 0 ok, 1 input error, 2 divergence or solver failure,
3 hypothesis failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cases
from .characteristics import CharacteristicError, HyperbolicityError
from .diagnostics import estimate_C_power_norm, diagnostic_domain, residuals, run_all_checks
from .grid import Domain, Grid, GridFunction
from .operators import IntegralOperators
from .problemfile import DEFAULT_SOLVER, ProblemFile, ProblemFileError, load, save
from .solver import DivergenceError, SolverError, forward_march, picard_solve, two_phase_solve

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_HYPOTHESIS, EXIT_VERIFY = 0, 1, 2, 3, 4


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _domain(pf):
    d = pf.domain
    return Domain.build(pf.spec, d["T"], d["Nx"], d["Nt"], d["depth"],
                        a_min=pf.solver.get("a_min", DEFAULT_SOLVER["a_min"]))


def _checks(pf, dom, args):
    ell = getattr(args, "ell", None)
    c = pf.checks
    return run_all_checks(pf.spec, dom, eps=c.get("eps", 1e-9), window=c.get("window"),
                          factor_tol=c.get("factor_tol", 1e-9),
                          factor_bound=c.get("factor_bound", 1e3), ell=None,
                          max_ell=ell or pf.solver.get("ell", 8), threads=args.threads)


# ---------------------------------------------------------------- output


def write_tables(u, out_dir, T):
    os.makedirs(out_dir, exist_ok=True)
    g = u.grid
    for j in range(u.n):
        header = f"component {j + 1}, Nx={g.nx}, Nt={g.nt}, T={T!r}"
        np.savetxt(os.path.join(out_dir, f"u_{j + 1}.csv"), u.values[j].T, fmt="%.17g",
                   delimiter=",", header=header, comments="# ")
    np.savetxt(os.path.join(out_dir, "t_grid.csv"), g.t, fmt="%.17g", header="t", comments="# ")
    np.savetxt(os.path.join(out_dir, "x_grid.csv"), g.x, fmt="%.17g", header="x", comments="# ")


def read_tables(sol_dir, n):
    """Read u_1.csv .. u_n.csv and the grids; returns (GridFunction, T)."""
    tables, T = [], None
    for j in range(n):
        path = os.path.join(sol_dir, f"u_{j + 1}.csv")
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
        meta = dict(part.strip().split("=", 1) for part in header.lstrip("# ").split(",")[1:])
        T = float(meta["T"])
        tables.append(np.loadtxt(path, delimiter=",", comments="#", ndmin=2).T)
    shape = tables[0].shape
    if any(t.shape != shape for t in tables):
        raise ValueError("component tables differ in shape")
    t = np.loadtxt(os.path.join(sol_dir, "t_grid.csv"), ndmin=1)
    x = np.loadtxt(os.path.join(sol_dir, "x_grid.csv"), ndmin=1)
    if shape != (len(x), len(t)):
        raise ValueError(f"tables of shape {shape[::-1]} do not match grids "
                         f"({len(t)} x {len(x)})")
    grid = Grid(len(x) - 1, len(t) - 1, float(t[0]), float(t[-1]), T)
    return GridFunction(grid, np.stack(tables)), T


def write_report(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in entries.items():
            fh.write(f"{key}: {value}\n")


def write_gnuplot(out_dir, u):
    g = u.grid
    lines = ['set datafile separator ","', "set pm3d map", 'set xlabel "x"', 'set ylabel "t"']
    for j in range(u.n):
        lines.append(f'set title "u_{j + 1}"')
        lines.append(f'splot "u_{j + 1}.csv" matrix using ($1*{g.dx!r}):({g.t_min!r}+$2*{g.dt!r}):3 '
                     f'with pm3d notitle')
        lines.append("pause -1")
    with open(os.path.join(out_dir, "plot.gp"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -------------------------------------------------------------- commands


def _load(path):
    try:
        return load(path)
    except FileNotFoundError:
        raise ProblemFileError("file not found", path=path) from None


def cmd_solve(args):
    pf = _load(args.problem)
    solver = dict(pf.solver)
    for key in ("tol", "max_iters", "mode", "ell"):
        if getattr(args, key, None) is not None:
            solver[key] = getattr(args, key)
    dom = _domain(pf)
    verdicts = _checks(pf, dom, args)
    failed = [v for v in verdicts if v.status == "fail"]
    for v in verdicts:
        print(v.line())
    if failed and not args.skip_checks:
        _err("hypotheses failed: " + ", ".join(v.condition for v in failed)
             + " (use --skip-checks to solve anyway)")
        return EXIT_HYPOTHESIS

    entries = {"problem": args.problem, "name": pf.spec.name or "-", "mode": solver["mode"],
               "Nx": dom.nx, "Nt": dom.nt, "T": dom.T, "T_pad": dom.t_pad, "depth": dom.depth}
    out = args.out
    os.makedirs(out, exist_ok=True)
    try:
        ops = IntegralOperators(pf.spec, dom.grid, substeps=solver["substeps"],
                                a_min=dom.a_min, threads=args.threads)
        if solver["mode"] == "picard":
            u, rep = picard_solve(pf.spec, dom, solver["tol"], solver["max_iters"], ops=ops)
        elif solver["mode"] == "two-phase":
            u, rep = two_phase_solve(pf.spec, dom, solver["tol"], solver["max_iters"], ops=ops)
        else:
            # zero initial trace at the bottom of the padded domain
            init = np.zeros((pf.spec.n, dom.nx + 1))
            u, rep = forward_march(pf.spec, dom, init, solver["tol"], t0=dom.grid.t_min, ops=ops)
    except DivergenceError as exc:
        _err(f"diverged: {exc}")
        entries["status"] = "diverged"
        entries["error"] = str(exc)
        if exc.report is not None:
            entries.update(exc.report.summary())
        _verdict_entries(entries, verdicts)
        write_report(os.path.join(out, "report.txt"), entries)
        return EXIT_DIVERGED
    except HyperbolicityError as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    except (SolverError, CharacteristicError) as exc:
        _err(f"solver failed: {exc}")
        return EXIT_DIVERGED

    rep.verdicts = verdicts
    res = residuals(pf.spec, u, ops=ops)
    rep.residuals.update({"pde": res.pde, "bc": res.bc, "int": res.int})
    entries["status"] = "converged"
    entries.update(rep.summary())
    _verdict_entries(entries, verdicts)
    write_tables(u, out, dom.T)
    write_report(os.path.join(out, "report.txt"), entries)
    if args.gnuplot:
        write_gnuplot(out, u)
    print(f"converged in {rep.iterations} iterations; wrote {out}")
    return EXIT_OK


def _verdict_entries(entries, verdicts):
    for v in verdicts:
        entries[f"verdict.{v.condition}"] = v.line().split(": ", 1)[1]


def cmd_diagnose(args):
    pf = _load(args.problem)
    dom = _domain(pf)
    verdicts = _checks(pf, dom, args)
    for v in verdicts:
        print(v.line())
    diss = next(v for v in verdicts if v.condition == "dissipativity")
    estimates = dict(diss.details.get("estimates", {}))
    if args.ell:
        ddom = diagnostic_domain(dom, args.ell)
        try:
            ops = IntegralOperators(pf.spec, ddom.grid, a_min=ddom.a_min, fan=False,
                                    threads=args.threads)
            for ell in range(1, args.ell + 1):
                if ell not in estimates:
                    estimates[ell] = estimate_C_power_norm(pf.spec, ddom, ell, ops=ops)
        except CharacteristicError as exc:
            _err(str(exc))
    for ell in sorted(estimates):
        print(f"norm C^{ell} >= {estimates[ell]:.12g}")
    return EXIT_OK if all(v.status == "pass" for v in verdicts) else EXIT_HYPOTHESIS


def cmd_verify(args):
    pf = _load(args.problem)
    try:
        u, T = read_tables(args.solution, pf.spec.n)
    except (OSError, ValueError, KeyError) as exc:
        _err(f"cannot read solution: {exc}")
        return EXIT_INPUT
    try:
        res = residuals(pf.spec, u, window=T)
    except CharacteristicError as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    for key, value in res.as_dict().items():
        print(f"{key}_res: {value:.6e}")
    if max(res.pde, res.bc, res.int) <= args.tol:
        return EXIT_OK
    _err(f"residuals exceed tolerance {args.tol:g}")
    return EXIT_VERIFY


def cmd_cases(args):
    if args.action == "list":
        for name in cases.names():
            c = cases.get(name)
            print(f"{name:22s} {c.tag:18s} {c.description}")
        return EXIT_OK
    if not args.name:
        _err("export needs a case name")
        return EXIT_INPUT
    try:
        case = cases.get(args.name)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_INPUT
    out = args.out or args.name
    os.makedirs(out, exist_ok=True)
    d = case.domain
    pf = ProblemFile(case.spec, {"T": d["T"], "Nx": d["Nx"], "Nt": d["Nt"], "depth": d["depth"]},
                     dict(DEFAULT_SOLVER), dict(case.checks))
    path = os.path.join(out, f"{args.name}.problem")
    save(pf, path)
    if case.exact is not None:
        dom = _domain(pf)
        write_tables(GridFunction.sample(dom.grid, case.exact), out, dom.T)
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="hypbvp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def problem_arg(sp):
        sp.add_argument("problem", nargs="?", help="problem file")
        sp.add_argument("--config", help="problem file (alternative to the positional)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")

    s = sub.add_parser("solve", help="solve a problem file")
    problem_arg(s)
    s.add_argument("--out", default="out", help="output directory")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", dest="max_iters", type=int)
    s.add_argument("--mode", choices=["picard", "two-phase", "march"])
    s.add_argument("--ell", type=int, help="largest power tried by the dissipativity check")
    s.add_argument("--skip-checks", action="store_true", help="solve even if hypotheses fail")
    s.add_argument("--gnuplot", action="store_true", help="also write plot.gp")
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("diagnose", help="check hypotheses and estimate norms of C^l")
    problem_arg(d)
    d.add_argument("--ell", type=int, help="also report estimates for l = 1..ell")
    d.set_defaults(func=cmd_diagnose)

    v = sub.add_parser("verify", help="residuals of a stored solution")
    problem_arg(v)
    v.add_argument("solution", nargs="?", help="directory with u_j.csv tables")
    v.add_argument("--tol", type=float, default=5e-2,
                   help="bound for all three residuals (default 5e-2)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("cases", help="list or export built-in cases")
    c.add_argument("action", choices=["list", "export"])
    c.add_argument("name", nargs="?")
    c.add_argument("out", nargs="?", help="output directory (default: case name)")
    c.set_defaults(func=cmd_cases)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command != "cases":
        if args.config:
            if args.command == "verify" and args.problem and not args.solution:
                args.solution = args.problem
            args.problem = args.config
        if not args.problem:
            _err("no problem file given")
            return EXIT_INPUT
        if args.command == "verify" and not args.solution:
            _err("verify needs a solution directory")
            return EXIT_INPUT
    try:
        return args.func(args)
    except ProblemFileError as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
