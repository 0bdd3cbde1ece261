"""Command-line front end: config resolution, sweeps, fits, reports.

Every subcommand reads an optional flat key=value config file; command-line
flags override file values.  Exit codes: 0 all checks passed, 1 at least one
check failed, 2 usage or configuration error.  All output paths come from
flags; nothing is written implicitly.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from .eigen import normalize, solve_psi
from .exponents import critical_exponents, gamma, theory_lifespan
from .functionals import (CheckNotApplicable, SolutionSamples,
                          inequality_check, ode_lemma_fit)
from .model import ConfigError, NONLINEARITIES, RunConfig, load_config
from .solver import estimate_lifespan, run
from .sweep import (SweepSpec, default_jobs, emit_plot, fit_powerlaw,
                    fit_sweep, run_sweep, sweep_rows, write_csv, csv_text,
                    SWEEP_HEADER)
from .testfunc import build_bq, verify_bq_identities

# verify-subcommand tokens (external interface) -> internal check names
CHECK_TOKENS = {
    "3.4": "ineq_3_4",
    "3.16": "ineq_3_16",
    "4.9": "ineq_4_9",
    "4.15": "ineq_4_15",
    "5.1": "ineq_5_1",
    "5.11": "ineq_5_11",
}

_CONFIG_FLAGS = (
    # (flag, dest/config key, type)
    ("--n", "n", int),
    ("--mu", "mu", float),
    ("--beta", "beta", float),
    ("--p", "p", float),
    ("--nonlinearity", "nonlinearity", str),
    ("--eps", "eps", float),
    ("--data-k", "data_k", int),
    ("--f-amp", "f_amp", float),
    ("--g-amp", "g_amp", float),
    ("--t-max", "t_max", float),
    ("--dr", "dr", float),
    ("--cfl", "cfl", float),
    ("--u-threshold", "u_threshold", float),
    ("--refine-levels", "refine_levels", int),
)


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", metavar="FILE",
                        help="flat key=value config file")
    for flag, key, typ in _CONFIG_FLAGS:
        parent.add_argument(flag, dest=key, type=typ, default=None,
                            help=f"override config key {key}")
    return parent


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for _, key, _typ in _CONFIG_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if "nonlinearity" in overrides and overrides["nonlinearity"] not in NONLINEARITIES:
        raise ConfigError(
            f"nonlinearity must be one of {NONLINEARITIES}, "
            f"got {overrides['nonlinearity']!r}")
    try:
        return replace(cfg, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _float_list(raw: str, what: str) -> list[float]:
    try:
        vals = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {what} list {raw!r}") from exc
    if not vals:
        raise ConfigError(f"empty {what} list")
    return vals


# --- subcommand handlers --------------------------------------------------------

def cmd_exponents(args) -> int:
    cfg = resolve_config(args)
    n = cfg.n
    exps = critical_exponents(n)
    mode = {"u": "power_u", "ut": "power_ut"}[args.mode] if args.mode else cfg.nonlinearity
    if mode == "none":
        mode = "power_u"
    p = args.p if args.p is not None else cfg.p
    bound = theory_lifespan(n, p, mode)
    g = gamma(p, n)
    print(f"n            = {n}")
    print(f"p_strauss    = {exps.p_strauss:.15g}")
    print(f"p_fujita     = {exps.p_fujita:.15g}")
    print(f"p_glassey    = {exps.p_glassey:.15g}")
    print(f"p            = {p:.15g}  ({mode})")
    print(f"gamma(p, n)  = {g:.15g}")
    if bound.kind == "polynomial":
        shape = f"T <= C eps^-{bound.exponent:.15g}"
    elif bound.kind == "exponential":
        shape = f"T <= exp(C eps^-{bound.exponent:.15g})"
    else:
        shape = "no upper bound asserted"
    print(f"bound        = {bound.kind}  {shape}  [{bound.branch}]")
    header = ("n", "pS", "pF", "pG", "gamma", "bound_kind", "bound_exponent")
    row = (n, exps.p_strauss, exps.p_fujita, exps.p_glassey, g,
           bound.kind, bound.exponent)
    print(csv_text(header, [row]), end="")
    if args.out:
        write_csv(args.out, header, [row])
    return 0


def cmd_solve(args) -> int:
    cfg = resolve_config(args)
    params = cfg.model_params()
    grid = cfg.grid()
    snap_times = (_float_list(args.snap_times, "snapshot time")
                  if args.snap_times else
                  list(np.linspace(0.0, cfg.t_max, 9)))
    out = run(params, grid, threshold=cfg.u_threshold, snapshot_times=snap_times)
    print(f"status={out.status} t_end={out.t_end:.6g} "
          f"max|u|={float(np.max(out.max_abs_u)):.6g} "
          f"snapshots={len(out.snapshots)}")
    if args.out:
        rows = []
        for t_s, u_s, v_s in out.snapshots:
            for j in range(grid.r.size):
                rows.append((t_s, grid.r[j], u_s[j], v_s[j]))
        write_csv(args.out, ("t", "r", "u", "ut"), rows)
    if args.summary:
        write_csv(args.summary,
                  ("eps", "status", "t_end", "dr", "dt", "threshold"),
                  [(params.eps, out.status, out.t_end, grid.dr, grid.dt,
                    cfg.u_threshold)])
    return 1 if out.status == "unstable" else 0


def cmd_lifespan(args) -> int:
    cfg = resolve_config(args)
    res = estimate_lifespan(cfg.model_params(), t_max=cfg.t_max, dr=cfg.dr,
                            levels=cfg.refine_levels, cfl=cfg.cfl,
                            threshold=cfg.u_threshold)
    print(f"eps={res.eps:.6g} T_levels={tuple(round(T, 6) for T in res.T_levels)} "
          f"T={res.T_extrapolated:.6g} uncertainty={res.uncertainty:.3g} "
          f"censored={res.censored} unreliable={res.unreliable}")
    if args.out:
        write_csv(args.out, SWEEP_HEADER, sweep_rows([res]))
    return 1 if res.unreliable else 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    spec = SweepSpec(config=cfg, eps_min=args.eps_min, eps_max=args.eps_max,
                     eps_count=args.eps_count, jobs=jobs)
    results = run_sweep(spec)
    write_csv(args.out, SWEEP_HEADER, sweep_rows(results))
    for res in results:
        print(f"eps={res.eps:.6g} T={res.T_extrapolated:.6g} "
              f"censored={res.censored} unreliable={res.unreliable}")
    fit, bound = fit_sweep(spec, results, tolerance=args.tolerance)
    if fit.verdict == "not_applicable":
        if bound.kind != "polynomial":
            print(f"bound kind is {bound.kind} [{bound.branch}]: power-law fit "
                  "not applicable; use the odelemma and verify subcommands for "
                  "critical-case evidence")
        else:
            print("fewer than 4 clean points: fit not applicable")
        return 0
    print(f"slope={fit.slope:.6g} r2={fit.r_squared:.6g} "
          f"theory={fit.theory_exponent:.6g} verdict={fit.verdict}")
    if args.plot:
        emit_plot(fit, args.plot,
                  f"lifespan scaling n={cfg.n} p={cfg.p:.6g} mu={cfg.mu:.6g}")
    return 0 if fit.verdict == "consistent" else 1


def _read_sweep_csv(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    idx = {name: header.index(name) for name in SWEEP_HEADER
           if name in header}
    for need in ("eps", "T"):
        if need not in idx:
            raise ConfigError(f"{path}: missing column {need!r}")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        eps = float(cells[idx["eps"]])
        T = float(cells[idx["T"]])
        censored = cells[idx["censored"]] == "true" if "censored" in idx else False
        unreliable = cells[idx["unreliable"]] == "true" if "unreliable" in idx else False
        rows.append((eps, T, censored, unreliable))
    return rows


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    rows = _read_sweep_csv(args.infile)
    points = [(eps, T) for eps, T, cen, unr in rows
              if not (cen or unr) and math.isfinite(T)]
    if args.theory_exponent is not None:
        theory = args.theory_exponent
    else:
        bound = theory_lifespan(cfg.n, cfg.p, cfg.nonlinearity)
        if bound.kind != "polynomial":
            print(f"bound kind is {bound.kind} [{bound.branch}]: power-law fit "
                  "not applicable; use the odelemma and verify subcommands")
            return 0
        theory = bound.exponent
    fit = fit_powerlaw(points, theory, tolerance=args.tolerance)
    print(f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
          f"r2={fit.r_squared:.6g} theory={fit.theory_exponent:.6g} "
          f"verdict={fit.verdict}")
    if args.out:
        write_csv(args.out,
                  ("slope", "intercept", "r_squared", "theory_exponent",
                   "verdict"),
                  [(fit.slope, fit.intercept, fit.r_squared,
                    fit.theory_exponent, fit.verdict)])
    if args.plot:
        emit_plot(fit, args.plot, "lifespan scaling fit")
    return 0 if fit.verdict == "consistent" else 1


def cmd_eigen(args) -> int:
    cfg = resolve_config(args)
    etas = _float_list(args.etas, "eta")
    if any(e < 0 for e in etas):
        raise ConfigError("eta values must be >= 0")
    if max(etas) * args.r_max > 700.0:
        raise ConfigError("eta*r_max too large for the unrescaled profile; "
                          "reduce r_max")
    rows = []
    for eta in etas:
        try:
            sol = normalize(solve_psi(eta, cfg.mu, cfg.beta, cfg.n, args.r_max))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for j in range(sol.r.size):
            rows.append((eta, sol.r[j], sol.psi[j], sol.w[j], sol.lam))
        print(f"eta={eta:.6g} lambda={sol.lam:.12g} sup|w|={float(np.max(np.abs(sol.w))):.6g}")
    if args.out:
        write_csv(args.out, ("eta", "r", "psi", "w", "lambda"), rows)
    return 0


def cmd_bq(args) -> int:
    cfg = resolve_config(args)
    q = args.q
    dt = args.dt if args.dt is not None else cfg.dr
    t_max = cfg.t_max
    r_max = args.r_max if args.r_max is not None else t_max
    t_grid = 1.0 + dt * np.arange(int(round((t_max - 1.0) / dt)) + 1)
    r_grid = cfg.dr * np.arange(int(round(r_max / cfg.dr)) + 1)
    params = cfg.model_params()
    tq = build_bq(q, params, t_grid, r_grid, nodes=args.nodes)
    tq1 = build_bq(q + 1.0, params, t_grid, r_grid, nodes=args.nodes,
                   psi_cache=None)
    tq2 = build_bq(q + 2.0, params, t_grid, r_grid, nodes=args.nodes,
                   psi_cache=None)
    rep = verify_bq_identities(tq, tq1, tq2)
    failed = False
    for name, res in (("dt", rep.res_dt), ("dtt", rep.res_dtt),
                      ("lap", rep.res_lap), ("wave", rep.res_wave)):
        ok = res <= args.threshold
        failed = failed or not ok
        print(f"identity {name}: max residual {res:.3e} "
              f"{'pass' if ok else 'FAIL'} (threshold {args.threshold:g})")
    if args.out:
        rows = []
        for i in range(t_grid.size):
            for j in range(r_grid.size):
                rows.append((t_grid[i], r_grid[j], tq.values[i, j]))
        write_csv(args.out, ("t", "r", "bq"), rows)
    return 1 if failed else 0


def _read_solution_csv(path: str):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 4:
        raise ConfigError(f"{path}: expected 4 columns t,r,u,ut")
    t_col = data[:, 0]
    t_vals, first = np.unique(t_col, return_index=True)
    t_vals = t_vals[np.argsort(first)]  # preserve file order
    nt = t_vals.size
    if data.shape[0] % nt != 0:
        raise ConfigError(f"{path}: rows not a whole number of snapshots")
    nr = data.shape[0] // nt
    r = data[:nr, 1]
    u = data[:, 2].reshape(nt, nr)
    ut = data[:, 3].reshape(nt, nr)
    return np.sort(t_vals), r, u, ut


def cmd_verify(args) -> int:
    cfg = resolve_config(args)
    tokens = [tok.strip() for tok in args.checks.split(",") if tok.strip()]
    for tok in tokens:
        if tok not in CHECK_TOKENS:
            raise ConfigError(f"unknown check {tok!r}; valid: "
                              f"{','.join(CHECK_TOKENS)}")
    t, r, u, ut = _read_solution_csv(args.solution)
    samples = SolutionSamples(params=cfg.model_params(), t=t, r=r, u=u, ut=ut)
    rows = []
    failed = []
    for tok in tokens:
        try:
            series = inequality_check(samples, CHECK_TOKENS[tok],
                                      count=args.points)
        except CheckNotApplicable as exc:
            print(f"check {tok}: skipped ({exc})")
            continue
        if series.mode == "sign":
            ok = bool(np.all(series.lhs >= 0.0))
            detail = f"min margin {float(series.lhs.min()):.3e} >= 0"
            for g, lhs in zip(series.grid, series.lhs):
                rows.append((tok, g, lhs, 0.0, math.nan))
        else:
            ok = series.passed(args.spread_tol)
            detail = f"ratio spread {series.spread:.3g} <= {args.spread_tol:g}"
            for g, lhs, rhs in zip(series.grid, series.lhs, series.rhs):
                rows.append((tok, g, lhs, rhs, lhs / rhs))
        print(f"check {tok}: {'pass' if ok else 'FAIL'} ({detail})")
        if not ok:
            failed.append(tok)
    if args.out:
        write_csv(args.out, ("check", "Tgrid_point", "lhs", "rhs", "ratio"),
                  rows)
    if failed:
        print(f"FAILED checks: {','.join(failed)}")
        return 1
    print("all checks passed")
    return 0


def cmd_odelemma(args) -> int:
    deltas = np.geomspace(args.delta_min, args.delta_max, args.delta_count)
    result = ode_lemma_fit(args.p1, args.p2, K1=args.k1, K2=args.k2,
                           delta_grid=deltas, cap=args.cap)
    rows = []
    for d, logT in zip(result.delta_grid, result.logT_grid):
        try:
            T = math.exp(logT)
        except OverflowError:
            T = math.inf
        rows.append((d, T, math.log(logT)))
    if args.out:
        write_csv(args.out, ("delta", "T", "loglogT"), rows)
    theory = result.theory_exponent
    dev = abs(result.fitted_exponent - theory) / theory
    print(f"fitted slope={result.fitted_exponent:.6g} theory={theory:.6g} "
          f"relative deviation={dev:.3g}")
    return 0 if dev <= args.tol else 1


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    parser = argparse.ArgumentParser(
        prog="strauss-lab",
        description="Numerical laboratory for blow-up and lifespan of "
                    "semilinear wave equations with scattering damping.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", parents=[parent],
                       help="critical exponents and proved bound shape")
    p.add_argument("--mode", choices=("u", "ut"), default=None,
                   help="nonlinearity landscape (default from config)")
    p.add_argument("--out", help="write the CSV row here")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("solve", parents=[parent], help="single forward run")
    p.add_argument("--snap-times", help="comma-separated snapshot times")
    p.add_argument("--out", help="snapshot CSV (t,r,u,ut)")
    p.add_argument("--summary", help="one-row outcome summary CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lifespan", parents=[parent],
                       help="blow-up time with refinement levels")
    p.add_argument("--out", help="one-row lifespan CSV")
    p.set_defaults(func=cmd_lifespan)

    p = sub.add_parser("sweep", parents=[parent],
                       help="parallel eps sweep plus scaling fit")
    p.add_argument("--eps-min", type=float, default=0.2)
    p.add_argument("--eps-max", type=float, default=1.0)
    p.add_argument("--eps-count", type=int, default=6)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default STRAUSS_LAB_JOBS or 1)")
    p.add_argument("--tolerance", type=float, default=0.3,
                   help="|slope - theory| tolerance for the verdict")
    p.add_argument("--out", required=True, help="sweep table CSV")
    p.add_argument("--plot", help="scaling plot SVG")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", parents=[parent],
                       help="power-law fit of an existing sweep CSV")
    p.add_argument("--in", dest="infile", required=True, help="sweep CSV")
    p.add_argument("--theory-exponent", type=float, default=None,
                   help="override the exponent from the config's (n, p, mode)")
    p.add_argument("--tolerance", type=float, default=0.3)
    p.add_argument("--out", help="one-row fit summary CSV")
    p.add_argument("--plot", help="scaling plot SVG")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eigen", parents=[parent],
                       help="radial eigenfunctions psi_eta and profiles")
    p.add_argument("--etas", default="1.0", help="comma-separated eta values")
    p.add_argument("--r-max", type=float, default=40.0)
    p.add_argument("--out", help="CSV eta,r,psi,w,lambda")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("bq", parents=[parent],
                       help="b_q table construction and identity report")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--dt", type=float, default=None,
                   help="table time step (default: config dr)")
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--threshold", type=float, default=1e-3,
                   help="identity residual pass threshold")
    p.add_argument("--out", help="CSV t,r,bq")
    p.set_defaults(func=cmd_bq)

    p = sub.add_parser("verify", parents=[parent],
                       help="inequality checks along a stored solution")
    p.add_argument("--solution", required=True, help="snapshot CSV from solve")
    p.add_argument("--checks", default="3.4,3.16,4.9,4.15,5.1,5.11",
                   help="comma list out of 3.4,3.16,4.9,4.15,5.1,5.11")
    p.add_argument("--points", type=int, default=12,
                   help="number of T (or M) grid points per check")
    p.add_argument("--spread-tol", type=float, default=20.0)
    p.add_argument("--out", help="CSV check,Tgrid_point,lhs,rhs,ratio")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("odelemma",
                       help="escape-time experiment for the critical ODE lemma")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--k1", type=float, default=1.0)
    p.add_argument("--k2", type=float, default=1.0)
    p.add_argument("--delta-min", type=float, default=1e-4)
    p.add_argument("--delta-max", type=float, default=1e-2)
    p.add_argument("--delta-count", type=int, default=8)
    p.add_argument("--cap", type=float, default=1e8)
    p.add_argument("--tol", type=float, default=0.10,
                   help="allowed relative slope deviation from theory")
    p.add_argument("--out", help="CSV delta,T,loglogT")
    p.set_defaults(func=cmd_odelemma)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
