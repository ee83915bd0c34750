"""Command-line interface: ``maxstab {simulate,assess-error,calibrate,bench,theta}``."""

from __future__ import annotations

import argparse
import logging
import re
import secrets
import shlex
import sys

from . import __version__
from .bench import (Scenario, calibrate, desk_scenarios, format_rows, load_scenarios,
                    run_benchmark, write_csv)
from .error_assess import (assess_appendixB, assess_by_continuation, bound_expected_missing,
                           estimate_P_formula)
from .exceptions import MaxStabError, NumericFailure, RunawayStop
from .model import ModelSpec, RngStream, parse_grid
from .simulate import ExtremalFunctions, subset_first_order, threshold_stopping
from .spectral import REP_ALIASES, estimate_theta_sup, increments_for, make_sampler

log = logging.getLogger("maxstab")

_TAU_RE = re.compile(r"^\s*([0-9.eE+-]*)\s*(N|theta)\s*$")


class UsageError(Exception):
    pass


def _model(args):
    kind = args.model.lower()
    if kind in ("br", "brownresnick"):
        if args.alpha is None or (args.v is None) == (args.s is None):
            raise UsageError("br needs --alpha and exactly one of --v / --s")
        return ModelSpec.brown_resnick(args.alpha, v=args.v, s=args.s)
    if kind in ("et", "extremalt"):
        if args.nu is None or args.s is None:
            raise UsageError("et needs --nu and --s")
        return ModelSpec.extremal_t(args.nu, args.s)
    raise UsageError(f"unknown model {args.model!r}")


def resolve_tau(text, sampler):
    """'exact', a number, or a multiple of N / theta such as '0.5N'."""
    t = text.strip()
    if t == "exact":
        if sampler.bound is None:
            raise UsageError(f"{sampler.rep_tag} is unbounded; 'exact' is not available")
        return float(sampler.bound)
    m = _TAU_RE.match(t)
    if m:
        mult = float(m.group(1)) if m.group(1) else 1.0
        if m.group(2) == "N":
            return mult * sampler.n
        return mult * getattr(sampler, "theta", 1.0)
    try:
        return float(t)
    except ValueError:
        raise UsageError(f"cannot parse tau {text!r}") from None


def _header(args, argv):
    cmd = list(argv)
    if "--seed" not in cmd:
        cmd += ["--seed", str(args.seed)]
    return [f"maxstab {__version__}", f"seed={args.seed}", "command: maxstab " + shlex.join(cmd)]


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _rep_name(method):
    key = method.lower().replace("-", "").replace("_", "")
    return REP_ALIASES.get(key, method)


def cmd_simulate(args, argv):
    model = _model(args)
    grid = parse_grid(args.grid)
    rows = []
    method = args.method.lower()
    if method == "ef":
        fam = increments_for(grid, model)
        n = grid.n if args.n is None else args.n
        order = None if n == grid.n else subset_first_order(grid.n, n)
        ef = ExtremalFunctions(fam, order)
        for r in range(args.reps):
            res = ef.run(RngStream(args.seed, r), n_steps=n)
            s = res.sample
            rows.append(list(s.values) + [s.stopping_time, s.gaussian_draws, s.exact])
    else:
        sampler = make_sampler(_rep_name(args.method), grid, model, theta=args.theta, seed=args.seed)
        tau = resolve_tau(args.tau, sampler)
        for r in range(args.reps):
            s, st = threshold_stopping(sampler, tau, RngStream(args.seed, r), max_iterations=args.max_iter)
            rows.append(list(s.values) + [st.T, st.N_W, st.exact_flag])
    fields = [f"z{i}" for i in range(grid.n)] + ["T", "N_W", "exact"]
    _emit(format_rows(rows, fields, _header(args, argv)), args.out)
    return 0


def cmd_assess(args, argv):
    model = _model(args)
    grid = parse_grid(args.grid)
    rep = _rep_name(args.method)
    eps = [float(e) for e in args.eps.split(",")] if args.eps else []
    mode = args.mode
    sampler = make_sampler(rep, grid, model, theta=args.theta, seed=args.seed)
    taus = [resolve_tau(t, sampler) for t in args.tau.split(",")]
    fields = ["tau", "rep", "mode", "reps", "p_any", "se_any"]
    fields += [f"p_abs_{e}" for e in eps] + [f"p_rel_{e}" for e in eps]
    fields += ["mean_missing", "se_missing", "warning"]
    rows = []
    if mode == "formula":
        for t in taus:
            p, se, w = estimate_P_formula(sampler, t, reps_outer=args.reps, reps_inner=args.inner,
                                          seed=args.seed)
            pa = [estimate_P_formula(sampler, t, e, "abs", args.reps, args.inner, args.seed)[0] for e in eps]
            pr = [estimate_P_formula(sampler, t, e, "rel", args.reps, args.inner, args.seed)[0] for e in eps]
            b, bse = bound_expected_missing(sampler, t, args.reps, args.seed)
            rows.append([t, sampler.rep_tag, "formula", args.reps, p, se] + pa + pr + [b, bse, w or ""])
    else:
        if mode == "appendixB":
            reports = assess_appendixB(model, grid, rep, taus, args.reps, args.seed, eps)
        else:
            tau_exact = None
            if sampler.bound is None or mode == "surrogate":
                tau_exact = args.surrogate_factor * max(taus)
            reports = assess_by_continuation(sampler, taus, args.reps, args.seed, eps, tau_exact=tau_exact)
        for r in reports:
            rows.append([r.tau, r.rep_tag, r.mode_tag, r.replications, r.p_any, r.se_any]
                        + [r.p_abs[e][0] for e in eps] + [r.p_rel[e][0] for e in eps]
                        + [r.mean_missing, r.se_missing, r.warning or ""])
    _emit(format_rows(rows, fields, _header(args, argv)), args.out)
    return 0


def cmd_calibrate(args, argv):
    model = _model(args)
    grid = parse_grid(args.grid)
    sc = Scenario("cli", model, grid, args.method, (args.target,), args.reps, args.seed,
                  args.v if args.v is not None else args.s)
    control, err, se = calibrate(sc, args.target)
    text = format_rows([[args.method.upper(), args.target, control, err, se]],
                       ["method", "target_error", "control_value", "achieved_error", "se_error"],
                       _header(args, argv))
    _emit(text, args.out)
    return 0


def cmd_bench(args, argv):
    if args.scenarios:
        scs = load_scenarios(args.scenarios)
    else:
        scs = desk_scenarios(reps=args.reps, n=args.n_sites, seed=args.seed)
    rows = run_benchmark(scs, threads=args.threads)
    text = write_csv(rows, header_lines=_header(args, argv))
    _emit(text, args.out)
    return 0


def cmd_theta(args, argv):
    model = _model(args)
    grid = parse_grid(args.grid)
    theta, se = estimate_theta_sup(grid, model, args.reps, args.seed)
    _emit(format_rows([[theta, se, grid.n, args.reps]], ["theta", "se", "N", "reps"], _header(args, argv)),
          args.out)
    return 0


def _model_flags(p):
    p.add_argument("--model", default="br", help="br (Brown-Resnick) or et (extremal-t)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--v", type=float, help="variogram 2 v |h|^alpha")
    p.add_argument("--s", type=float, help="scale: |h/s|^alpha (br) or exp(-|h|/s) (et)")
    p.add_argument("--nu", type=float)
    p.add_argument("--grid", default="-1:1:101", help="a:b:N[,a:b:N]")


def _common(p, reps=1000):
    p.add_argument("--reps", type=int, default=reps)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="maxstab", description="Simulation of max-stable fields on grids.",
                                 allow_abbrev=False)
    ap.add_argument("--version", action="version", version=f"maxstab {__version__}")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw realizations", allow_abbrev=False)
    _model_flags(p)
    _common(p, reps=10)
    p.add_argument("--method", default="ef", help="ef, dm, sn, original, shifted, minvar, et")
    p.add_argument("--tau", default="exact")
    p.add_argument("--n", type=int, default=None, help="EF subset size")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=10 ** 6)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assess-error", help="error of threshold stopping", allow_abbrev=False)
    _model_flags(p)
    _common(p)
    p.add_argument("--method", default="dm")
    p.add_argument("--tau", required=True, help="comma list; numbers, 'exact', '0.5N'")
    p.add_argument("--mode", default="continuation",
                   choices=["continuation", "surrogate", "appendixB", "formula"])
    p.add_argument("--eps", default="")
    p.add_argument("--inner", type=int, default=200)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--surrogate-factor", type=float, default=50.0)
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("calibrate", help="control value for a target error", allow_abbrev=False)
    _model_flags(p)
    _common(p, reps=2000)
    p.add_argument("--method", default="DM", choices=["DM", "EF", "SN", "dm", "ef", "sn"])
    p.add_argument("--target", type=float, required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="run a scenario file (or the desk study)", allow_abbrev=False)
    _common(p, reps=2000)
    p.add_argument("--scenarios", default=None, help="INI file, one section per scenario")
    p.add_argument("--n-sites", type=int, default=101)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("theta", help="extremal coefficient of the grid", allow_abbrev=False)
    _model_flags(p)
    _common(p, reps=20000)
    p.set_defaults(func=cmd_theta)
    return ap


def _glue_values(argv):
    # values such as -1:1:101 start with '-' and would be taken for flags
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in ("--grid", "--tau") and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(_glue_values(argv))
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(message)s")
    if getattr(args, "seed", 0) is None:
        args.seed = secrets.randbits(32)
    try:
        return args.func(args, argv)
    except (UsageError, ValueError) as exc:
        ap.print_usage(sys.stderr)
        print(f"maxstab: error: {exc}", file=sys.stderr)
        return 2
    except (NumericFailure, RunawayStop) as exc:
        print(f"maxstab: {type(exc).__name__}: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            for k, v in sorted(diag.items()):
                print(f"  {k}: {v}", file=sys.stderr)
        return 1
    except MaxStabError as exc:
        print(f"maxstab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
