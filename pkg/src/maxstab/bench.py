"""Desk-scale benchmark: calibrate controls to target error probabilities and measure mean cost.

Methods
-------
DM  threshold stopping with the sum-normalized representation, control tau.
SN  threshold stopping with the sup-normalized representation (rejection
    sampled), control tau.
EF  extremal functions stopped after an equidistant subset, control n.

The cost unit is the number of Gaussian vectors drawn (N_W). Calibration
and the reported achieved error use disjoint random streams.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import DegenerateRequest, InvalidArgument, RunawayStop
from .model import BROWN_RESNICK, EXTREMAL_T, Grid, ModelSpec, RngStream, make_grid_1d, parse_grid
from .simulate import ExtremalFunctions, StopTrace, subset_first_order, threshold_stopping
from .spectral import SumNormSampler, estimate_theta_sup, increments_for, make_supnorm

METHODS = ("DM", "EF", "SN")
CSV_FIELDS = ["scenario_id", "model_kind", "alpha_or_nu", "v_or_s", "N", "method", "target_error",
              "control_value", "mean_T", "se_T", "mean_NW", "se_NW", "achieved_error", "se_error",
              "reps", "seed"]

# stream-id blocks: calibration and measurement never share streams
CALIB, HELDOUT, PILOT, PLUGIN = 0, 1 << 32, 2 << 32, 3 << 32


@dataclass
class Scenario:
    scenario_id: str
    model: ModelSpec
    grid: Grid
    method: str
    targets: Sequence[float] = (0.0,)
    replications: int = 2000
    seed: int = 0
    v_or_s: Optional[float] = None   # as given by the user, for reporting

    def __post_init__(self):
        self.method = self.method.upper()
        if self.method not in METHODS:
            raise InvalidArgument(f"method must be one of {METHODS}, got {self.method!r}")
        if self.replications < 100:
            raise InvalidArgument("at least 100 replications per scenario")
        for t in self.targets:
            if not 0 <= t < 1:
                raise InvalidArgument(f"target error must lie in [0, 1), got {t}")


@dataclass
class BenchRow:
    scenario_id: str
    model_kind: str
    alpha_or_nu: float
    v_or_s: float
    N: int
    method: str
    target_error: float
    control_value: float
    mean_T: float
    se_T: float
    mean_NW: float
    se_NW: float
    achieved_error: float
    se_error: float
    reps: int
    seed: int
    wall_seconds: float = 0.0
    failures: int = 0

    def csv_values(self):
        return [getattr(self, f) for f in CSV_FIELDS]


def _ms(x):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return (float(x.mean()) if len(x) else math.nan), math.nan
    return math.fsum(x) / len(x), float(np.std(x, ddof=1) / math.sqrt(len(x)))


# ---------------------------------------------------------------------------
# threshold stopping: one traced exact run per replication serves every tau
# ---------------------------------------------------------------------------

@dataclass
class TracedRuns:
    """Exact runs with per-draw stopping statistics.

    ``crit[r]`` is the smallest threshold reproducing run r exactly, so the
    run with threshold tau is in error iff ``tau < crit[r]``.
    """

    exact_tau: float
    traces: List[StopTrace]
    crit: np.ndarray
    failures: int = 0

    def error_rate(self, tau):
        e = self.crit > tau
        return _ms(e)

    def costs(self, tau):
        tau = min(tau, self.exact_tau)
        tn = np.array([tr.cost(tau) for tr in self.traces], dtype=float)
        return tn[:, 0], tn[:, 1]


def traced_runs(sampler, reps: int, seed: int, offset: int = 0) -> TracedRuns:
    tau = float(sampler.bound)
    traces, crit, fails = [], [], 0
    for r in range(reps):
        try:
            s, _ = threshold_stopping(sampler, tau, RngStream(seed, offset + r), trace=True)
        except RunawayStop:
            fails += 1
            continue
        tr = s.extra["trace"]
        traces.append(tr)
        crit.append(tr.critical_tau())
    return TracedRuns(tau, traces, np.array(crit), fails)


def calibrate_tau(runs: TracedRuns, target: float, max_iter: int = 100) -> float:
    """Bisection on tau in [0, exact] against the common-random-number error curve."""
    if target == 0:
        return runs.exact_tau
    p0, _ = runs.error_rate(0.0)
    if p0 < target:
        raise DegenerateRequest(f"error at tau=0+ is {p0:.4g}, below the target {target}")
    lo, hi = 0.0, runs.exact_tau
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p, se = runs.error_rate(mid)
        if abs(p - target) < max(0.1 * target, 2 * se):
            return mid
        if p > target:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# extremal functions on a subset: error is any new extremal function after n steps
# ---------------------------------------------------------------------------

class EFSubsetRuns:
    """Cached partial-then-full EF runs per subset size."""

    def __init__(self, model, grid, reps, seed, offset=0, family=None):
        self.family = family if family is not None else increments_for(grid, model)
        self.n_total = grid.n
        self.reps = reps
        self.seed = seed
        self.offset = offset
        self._cache: Dict[int, tuple] = {}

    def measure(self, n):
        if n not in self._cache:
            order = None if n == self.n_total else subset_first_order(self.n_total, n)
            ef = ExtremalFunctions(self.family, order)
            err = np.empty(self.reps, dtype=bool)
            cost = np.empty(self.reps)
            for r in range(self.reps):
                res = ef.run(RngStream(self.seed, self.offset + r), n_steps=n,
                             continue_full=n < self.n_total)
                err[r] = res.partial_error
                cost[r] = res.partial_T
            self._cache[n] = (err, cost)
        return self._cache[n]

    def error_rate(self, n):
        return _ms(self.measure(n)[0])


def calibrate_n(runs: EFSubsetRuns, target: float) -> int:
    """Smallest subset size whose measured error does not exceed the target."""
    n_total = runs.n_total
    if target == 0:
        return n_total
    if runs.error_rate(1)[0] < target:
        return 1
    lo, hi = 1, n_total       # err(lo) > target, err(hi) = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if runs.error_rate(mid)[0] <= target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------

def _model_fields(model: ModelSpec, v_or_s):
    if model.kind == BROWN_RESNICK:
        return model.alpha, (v_or_s if v_or_s is not None else model.variance_v)
    return model.nu, model.scale


def _sampler_for(sc: Scenario):
    if sc.method == "DM":
        return SumNormSampler(sc.grid, sc.model)
    return make_supnorm(sc.grid, sc.model, seed=sc.seed, stream_id=PILOT)


def run_scenario(sc: Scenario) -> List[BenchRow]:
    """Calibrate every target on calibration streams, then measure on held-out streams."""
    t0 = time.perf_counter()
    a, b = _model_fields(sc.model, sc.v_or_s)
    rows = []
    if sc.method in ("DM", "SN"):
        sampler = _sampler_for(sc)
        cal = traced_runs(sampler, sc.replications, sc.seed, CALIB)
        held = traced_runs(sampler, sc.replications, sc.seed, HELDOUT)
        controls = [calibrate_tau(cal, t) for t in sc.targets]
        for t, c in zip(sc.targets, controls):
            T, nw = held.costs(c)
            mt, st = _ms(T)
            mn, sn = _ms(nw)
            pe, se = held.error_rate(c)
            rows.append(BenchRow(sc.scenario_id, sc.model.kind, a, b, sc.grid.n, sc.method, t, c,
                                 mt, st, mn, sn, pe, se, len(held.traces), sc.seed,
                                 failures=cal.failures + held.failures))
    else:
        cal = EFSubsetRuns(sc.model, sc.grid, sc.replications, sc.seed, CALIB)
        held = EFSubsetRuns(sc.model, sc.grid, sc.replications, sc.seed, HELDOUT, family=cal.family)
        for t in sc.targets:
            n = calibrate_n(cal, t)
            err, cost = held.measure(n)
            mt, st = _ms(cost)
            pe, se = _ms(err)
            rows.append(BenchRow(sc.scenario_id, sc.model.kind, a, b, sc.grid.n, "EF", t, n,
                                 mt, st, mt, st, pe, se, sc.replications, sc.seed))
    wall = time.perf_counter() - t0
    for r in rows:
        r.wall_seconds = wall
    return rows


def run_benchmark(scenarios: Sequence[Scenario], threads: int = 1) -> List[BenchRow]:
    """Rows for every scenario, in input order."""
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run_scenario, scenarios))
    else:
        parts = [run_scenario(sc) for sc in scenarios]
    return [r for p in parts for r in p]


def calibrate(sc: Scenario, target: float):
    """(control, achieved error, se) for one target, achieved error on held-out streams."""
    sc2 = Scenario(sc.scenario_id, sc.model, sc.grid, sc.method, (target,), sc.replications, sc.seed, sc.v_or_s)
    row = run_scenario(sc2)[0]
    return row.control_value, row.achieved_error, row.se_error


def plugin_constants(model: ModelSpec, grid: Grid, reps: int, seed: int = 0):
    """E{1/min Z} from exact samples and the extremal coefficient, each with its SE."""
    ef = ExtremalFunctions(increments_for(grid, model))
    inv = np.array([1.0 / ef.run(RngStream(seed, PLUGIN + r)).sample.values.min() for r in range(reps)])
    theta = estimate_theta_sup(grid, model, max(reps, 2), seed, PILOT + 1)
    return {"inf_recip": _ms(inv), "theta": theta}


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x == int(x) and abs(x) < 1e15:
            return str(int(x))
        return repr(round(x, 10))
    return str(x)


def format_rows(rows, fields, header_lines=()):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def write_csv(rows: Sequence[BenchRow], path=None, header_lines=()):
    text = format_rows([r.csv_values() for r in rows], CSV_FIELDS, header_lines)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _floats(text):
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def load_scenarios(path) -> List[Scenario]:
    """Scenario file: one INI section per scenario.

    Keys: model (br | et), alpha and v or s (br), nu and s (et), grid (a:b:N),
    method (DM | EF | SN, or a comma list), targets (comma list),
    replications, seed.
    """
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    out = []
    for name in cp.sections():
        sec = cp[name]
        kind = sec.get("model", "br").lower()
        if kind in ("br", "brownresnick", "brown-resnick"):
            v = sec.getfloat("v", fallback=None)
            s = sec.getfloat("s", fallback=None)
            model = ModelSpec.brown_resnick(sec.getfloat("alpha"), v=v, s=s)
            vs = v if v is not None else s
        elif kind in ("et", "extremalt", "extremal-t"):
            model = ModelSpec.extremal_t(sec.getfloat("nu"), sec.getfloat("s"))
            vs = model.scale
        else:
            raise InvalidArgument(f"[{name}] unknown model {kind!r}")
        grid = parse_grid(sec.get("grid", "-1:1:101"))
        targets = _floats(sec.get("targets", "0"))
        reps = sec.getint("replications", fallback=2000)
        seed = sec.getint("seed", fallback=0)
        for m in sec.get("method", "DM,EF,SN").split(","):
            m = m.strip().upper()
            out.append(Scenario(name, model, grid, m, targets, reps, seed, vs))
    return out


def desk_scenarios(reps: int = 2000, n: int = 101, seed: int = 0,
                   targets=(0.0, 0.01, 0.05, 0.1)) -> List[Scenario]:
    """The desk-scale study: Brown-Resnick and extremal-t families on [-1, 1]."""
    grid = make_grid_1d(-1.0, 1.0, n)
    out = []
    for alpha in (0.6, 1.0, 1.8):
        for v in (0.5, 1.0):
            sid = f"br_a{alpha}_v{v}"
            for m in METHODS:
                out.append(Scenario(sid, ModelSpec.brown_resnick(alpha, v=v), grid, m, targets, reps, seed, v))
    for nu in (1.0, 2.0):
        for s in (0.5, 1.0):
            sid = f"et_nu{nu}_s{s}"
            for m in METHODS:
                out.append(Scenario(sid, ModelSpec.extremal_t(nu, s), grid, m, targets, reps, seed, s))
    return out
