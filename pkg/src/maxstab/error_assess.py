"""Estimating the error of approximate threshold stopping and partial extremal functions.

Three routes are provided:

* continuation: run the bounded (or a much larger surrogate) threshold and
  compare with the field at the smaller threshold's stopping time;
* reconstruction: rebuild the whole relevant part of the Poisson point
  process around an exact sample (Brown-Resnick representations only);
* formula: Monte Carlo evaluation of the closed-form error probabilities and
  missing-function counts, which only need independent draws of the field
  and of the spectral process.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import DegenerateRequest, InvalidArgument, NumericFailure, UnsupportedRepresentation
from .gaussian import anchored_cov, cov_from_variogram, cov_minvar
from .model import BROWN_RESNICK, Grid, ModelSpec, RngStream
from .simulate import ExtremalFunctions, equidistant_subset, threshold_stopping
from .spectral import (
    MINVAR,
    ORIGINAL,
    SHIFTED,
    BRIncrements,
    SpectralSampler,
    SumNormSampler,
    default_anchor,
    increments_for,
)

# stream-id offsets keep the estimators in one call on disjoint streams
OUTER, INNER, VDRAW, AUX = 0, 1 << 40, 2 << 40, 3 << 40


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    r = len(x)
    if r == 0:
        return math.nan, math.nan
    mean = math.fsum(x) / r
    se = float(np.std(x, ddof=1) / math.sqrt(r)) if r > 1 else math.inf
    return mean, se


@dataclass
class ErrorReport:
    tau: float
    rep_tag: str
    mode_tag: str
    replications: int
    p_any: float
    se_any: float
    p_abs: dict = field(default_factory=dict)   # eps -> (p, se)
    p_rel: dict = field(default_factory=dict)
    mean_missing: float = math.nan
    se_missing: float = math.nan
    warning: Optional[str] = None

    def row(self):
        return {"tau": self.tau, "rep": self.rep_tag, "mode": self.mode_tag,
                "reps": self.replications, "p_any": self.p_any, "se_any": self.se_any,
                "mean_missing": self.mean_missing, "se_missing": self.se_missing,
                "warning": self.warning or ""}


def _report(tau, rep, mode, err, dev_abs, dev_rel, missing, eps):
    err = np.asarray(err, dtype=float)
    p, se = _mean_se(err)
    rep_ = ErrorReport(tau, rep, mode, len(err), p, se)
    for e in eps:
        rep_.p_abs[e] = _mean_se(np.asarray(dev_abs) > e)
        rep_.p_rel[e] = _mean_se(np.asarray(dev_rel) > e)
    rep_.mean_missing, rep_.se_missing = _mean_se(missing)
    return rep_


def _zero_report(tau, rep, mode, reps, eps, why):
    r = ErrorReport(tau, rep, mode, reps, 0.0, 0.0, warning=why)
    for e in eps:
        r.p_abs[e] = (0.0, 0.0)
        r.p_rel[e] = (0.0, 0.0)
    r.mean_missing, r.se_missing = 0.0, 0.0
    return r


def _deviations(z_exact, z_approx):
    d = z_exact - z_approx
    return float(d.max()), float((d / z_approx).max()) if np.all(z_approx > 0) else math.inf


def assess_by_continuation(sampler: SpectralSampler, taus, reps: int, seed: int,
                           eps: Sequence[float] = (), tau_exact: Optional[float] = None,
                           stream_offset: int = 0):
    """Error of threshold stopping at each ``tau`` by continuing the same run.

    The reference run uses ``tau_exact`` (default: the sampler's almost-sure
    bound, which makes it exact). For unbounded samplers pass a large
    surrogate threshold; the report is then tagged ``surrogate``.
    Returns one :class:`ErrorReport` per threshold (a single report when
    ``taus`` is a scalar).
    """
    scalar = np.ndim(taus) == 0
    taus = [float(t) for t in np.atleast_1d(taus)]
    if tau_exact is None:
        if sampler.bound is None:
            raise UnsupportedRepresentation(
                f"{sampler.rep_tag} is unbounded; pass tau_exact for a surrogate reference")
        tau_exact = sampler.bound
        mode = "continuation"
    else:
        mode = "continuation" if sampler.bound is not None and tau_exact >= sampler.bound else "surrogate"
    live = [t for t in taus if t < tau_exact]
    res = {t: ([], [], [], []) for t in live}
    for r in range(reps):
        rng = RngStream(seed, stream_offset + r)
        s, _ = threshold_stopping(sampler, tau_exact, rng, snapshot_taus=live)
        owner = s.extra["owner"]
        snaps = {sn.tau: sn for sn in s.extra.get("snapshots", [])}
        for t in live:
            sn = snaps[t]
            err, dev_abs, dev_rel, miss = res[t]
            differs = bool(np.any(s.values != sn.values))
            err.append(differs)
            if differs:
                a, b = _deviations(s.values, sn.values)
            else:
                a = b = 0.0
            dev_abs.append(a)
            dev_rel.append(b)
            miss.append(len(np.unique(owner[owner >= sn.T])))
    out = []
    for t in taus:
        if t in res:
            out.append(_report(t, sampler.rep_tag, mode, *res[t], eps))
        else:
            out.append(_zero_report(t, sampler.rep_tag, mode, reps, eps, "degenerate-request"))
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# reconstruction of the point process around an exact sample
# ---------------------------------------------------------------------------

class LogGaussianPosterior:
    """Law of log U given U V = phi, for V = exp(W - diag(C)/2), W ~ N(0, C).

    With a = log phi + diag(C)/2 and t = log U, the conditional density is
    proportional to exp(-t) N(a - t 1; 0, C). If the null space of C has a
    component along 1, t is pinned by the linear constraint; otherwise t is
    Gaussian with precision q = 1' C^+ 1 and mean (1' C^+ a - 1) / q.
    """

    def __init__(self, cov, null_tol=1e-10):
        c = np.asarray(cov, dtype=float)
        c = 0.5 * (c + c.T)
        self.n = c.shape[0]
        self.half_var = 0.5 * np.diag(c)
        lam, q = np.linalg.eigh(c)
        big = lam > null_tol * max(lam.max(), 1e-300)
        ones = np.ones(self.n)
        q0 = q[:, ~big]
        proj = q0.T @ ones
        if np.linalg.norm(proj) > 1e-6 * math.sqrt(self.n):
            self.pinned = True
            self._w = q0 @ proj / float(proj @ proj)   # t = w . a
        else:
            self.pinned = False
            cplus = (q[:, big] / lam[big]) @ q[:, big].T
            b = cplus @ ones
            self.precision = float(ones @ b)
            self._b = b / self.precision

    def conditional(self, log_phi):
        """Mean and sd of log U for each row of ``log_phi``."""
        a = np.atleast_2d(log_phi) + self.half_var
        if self.pinned:
            return a @ self._w, np.zeros(a.shape[0])
        mean = a @ self._b - 1.0 / self.precision
        return mean, np.full(a.shape[0], 1.0 / math.sqrt(self.precision))

    def sample_log_u(self, log_phi, gen):
        mean, sd = self.conditional(log_phi)
        if self.pinned:
            return mean
        return mean + sd * gen.standard_normal(len(mean))


class ShiftedPosterior:
    """Law of (S, log U) given U V = phi for the randomly shifted representation.

    Given the shift S the field is pinned at S, so log U = log phi(S); the
    shift has posterior weight proportional to
    exp(-log phi(S)) N(a_S - log phi(S); 0, C_S) over the other sites.
    """

    def __init__(self, grid: Grid, model: ModelSpec):
        n = grid.n
        self.n = n
        gam = model.variogram_r(grid.distances())
        self.half_gamma = 0.5 * gam
        self.chol = []
        self.logdet = np.zeros(n)
        for s in range(n):
            keep = np.delete(np.arange(n), s)
            c = 0.5 * (gam[s, keep][:, None] + gam[s, keep][None, :] - gam[np.ix_(keep, keep)])
            if n > 1:
                L = np.linalg.cholesky(c + 1e-12 * np.trace(c) / len(keep) * np.eye(len(keep)))
                self.logdet[s] = 2 * np.log(np.diag(L)).sum()
            else:
                L = np.zeros((0, 0))
            self.chol.append((keep, L))

    def log_weights(self, log_phi):
        log_phi = np.atleast_2d(log_phi)
        k = log_phi.shape[0]
        out = np.empty((k, self.n))
        for s, (keep, L) in enumerate(self.chol):
            t = log_phi[:, s]
            if len(keep):
                a = log_phi[:, keep] + self.half_gamma[s, keep] - t[:, None]
                y = solve_triangular(L, a.T, lower=True)
                quad = (y * y).sum(axis=0)
            else:
                quad = np.zeros(k)
            out[:, s] = -t - 0.5 * quad - 0.5 * self.logdet[s]
        return out

    def sample_log_u(self, log_phi, gen):
        lw = self.log_weights(log_phi)
        lw -= lw.max(axis=1, keepdims=True)
        w = np.exp(lw)
        w /= w.sum(axis=1, keepdims=True)
        u = gen.random(len(w))
        s = (np.cumsum(w, axis=1) < u[:, None]).sum(axis=1)
        s = np.minimum(s, self.n - 1)
        return np.atleast_2d(log_phi)[np.arange(len(s)), s]


def posterior_for(rep_sampler):
    tag = rep_sampler.rep_tag
    if tag in (ORIGINAL, MINVAR):
        return LogGaussianPosterior(rep_sampler.cov.entries)
    if tag == SHIFTED:
        return ShiftedPosterior(rep_sampler.grid, rep_sampler.model)
    raise UnsupportedRepresentation(f"point-process reconstruction is not available for {tag}")


@dataclass
class Reconstruction:
    u: np.ndarray           # descending
    functions: np.ndarray   # u * v, rows in the same order
    extremal: np.ndarray    # bool flags
    z: np.ndarray

    def stop_statistics(self):
        """g_j = min Z^(j) / U_{j+1} for j = 1..k+l-1; threshold tau stops at the first g_j > tau."""
        run = np.maximum.accumulate(self.functions, axis=0)
        return run[:-1].min(axis=1) / self.u[1:], run

    def evaluate(self, tau):
        """(error, sup abs dev, sup rel dev, missing extremal count) at threshold ``tau``."""
        g, run = self.stop_statistics()
        hit = np.flatnonzero(g > tau)
        if len(hit) == 0:
            return False, 0.0, 0.0, 0
        T = int(hit[0]) + 1
        zt = run[T - 1]
        d = self.z - zt
        return True, float(d.max()), float((d / zt).max()), int(self.extremal[T:].sum())


def reconstruct(rep_sampler, posterior, ef: ExtremalFunctions, rng: RngStream,
                check: bool = True) -> Reconstruction:
    """Rebuild every Poisson point with U >= min U+ around one exact sample."""
    res = ef.run(rng, record=True)
    phi = res.functions
    z = res.sample.values
    log_u = posterior.sample_log_u(np.log(phi), rng.aux)
    u_plus = np.exp(log_u)
    u_min = float(u_plus.min())
    count = int(rng.aux.poisson(1.0 / u_min))
    if count:
        u_minus = u_min / (1.0 - rng.aux.random(count))
        v, _ = rep_sampler.sample(rng, count)
        f_minus = u_minus[:, None] * v
        keep = np.all(f_minus < z, axis=1)
        u_minus, f_minus = u_minus[keep], f_minus[keep]
        if check and len(f_minus):
            assert np.all(f_minus < z)
    else:
        u_minus = np.zeros(0)
        f_minus = np.zeros((0, len(z)))
    u = np.concatenate([u_plus, u_minus])
    f = np.vstack([phi, f_minus])
    ext = np.concatenate([np.ones(len(u_plus), bool), np.zeros(len(u_minus), bool)])
    order = np.argsort(-u, kind="stable")
    return Reconstruction(u[order], f[order], ext[order], z)


def assess_appendixB(model: ModelSpec, grid: Grid, rep: str, taus, reps: int, seed: int,
                     eps: Sequence[float] = (), anchor=None, half_width=None, stream_offset: int = 0):
    """Error of threshold stopping with an unbounded Brown-Resnick representation.

    Each replication draws an exact sample with its extremal functions,
    splits every extremal function into (U, V) under the representation,
    adds the non-extremal points above min U and replays the stopping rule.
    """
    if model.kind != BROWN_RESNICK:
        raise UnsupportedRepresentation("reconstruction is implemented for Brown-Resnick models only")
    from .spectral import make_sampler
    sampler = make_sampler(rep, grid, model, anchor=anchor, half_width=half_width)
    post = posterior_for(sampler)
    ef = ExtremalFunctions(increments_for(grid, model))
    scalar = np.ndim(taus) == 0
    taus = [float(t) for t in np.atleast_1d(taus)]
    res = {t: ([], [], [], []) for t in taus}
    for r in range(reps):
        rec = reconstruct(sampler, post, ef, RngStream(seed, stream_offset + r))
        for t in taus:
            e, a, b, m = rec.evaluate(t)
            for lst, val in zip(res[t], (e, a, b, m)):
                lst.append(val)
    out = [_report(t, sampler.rep_tag, "appendixB", *res[t], eps) for t in taus]
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# formula-based estimators
# ---------------------------------------------------------------------------

def _z_exact_samples(model, grid, reps, seed, offset, family=None):
    ef = ExtremalFunctions(family if family is not None else increments_for(grid, model))
    return np.array([ef.run(RngStream(seed, offset + r)).sample.values for r in range(reps)])


def _v_samples(sampler, reps, seed, offset):
    v, _ = sampler.sample(RngStream(seed, offset), reps)
    return v


def estimate_P_formula(sampler: SpectralSampler, tau: float, eps: float = 0.0, mode: str = "any",
                       reps_outer: int = 1000, reps_inner: int = 200, seed: int = 0,
                       positive_part: str = "per_draw"):
    """Error probability of threshold stopping from independent field and spectral draws.

    Outer draws are threshold-stopped fields Z_T; for each, the inner mean over
    spectral draws V of {sup V / (Z_T + f) - tau / min Z_T}_+ gives the
    conditional mass of missed points, and the estimate is
    1 - mean(exp(-inner mean)). ``mode`` selects f: 0 (``any``), eps
    (``abs``) or eps * Z_T (``rel``). ``positive_part="mean"`` applies the
    positive part after averaging instead (sensitivity option).
    Returns ``(estimate, se, warning)``.
    """
    if mode not in ("any", "abs", "rel"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    if positive_part not in ("per_draw", "mean"):
        raise InvalidArgument(f"unknown positive_part {positive_part!r}")
    warn = "inner-bias-risk" if reps_inner < 30 else None
    if mode == "abs" and math.isinf(eps):
        return 0.0, 0.0, warn
    vals = np.empty(reps_outer)
    for r in range(reps_outer):
        zt, _ = threshold_stopping(sampler, tau, RngStream(seed, OUTER + r))
        z = zt.values
        v, _ = sampler.sample(RngStream(seed, INNER + r), reps_inner)
        if mode == "any":
            denom = z
        elif mode == "abs":
            denom = z + eps
        else:
            denom = (1.0 + eps) * z
        diff = (v / denom).max(axis=1) - tau / z.min()
        if positive_part == "per_draw":
            inner = np.maximum(diff, 0.0).mean()
        else:
            inner = max(diff.mean(), 0.0)
        vals[r] = math.exp(-inner)
    m, se = _mean_se(vals)
    return 1.0 - m, se, warn


def bound_expected_missing(sampler: SpectralSampler, tau: float, reps: int, seed: int = 0,
                           z_samples=None):
    """Monte Carlo value of E{sup V/Z - tau / min Z}_+ with Z exact and V independent."""
    if z_samples is None:
        z_samples = _z_exact_samples(sampler.model, sampler.grid, reps, seed, OUTER)
    reps = len(z_samples)
    v = _v_samples(sampler, reps, seed, VDRAW)
    d = (v / z_samples).max(axis=1) - tau / z_samples.min(axis=1)
    return _mean_se(np.maximum(d, 0.0))


def ef_partial_error(model: ModelSpec, grid: Grid, n: int, reps: int, seed: int = 0,
                     v_sampler: Optional[SpectralSampler] = None, z_samples=None):
    """Expected number of extremal functions missed after ``n`` sites.

    E sup V/Z - E max over the ``n``-site equidistant subset of V/Z, on common
    pairs (Z, V). ``n = 0`` gives E sup V/Z, the mean number of extremal
    functions.
    """
    if not 0 <= n <= grid.n:
        raise InvalidArgument(f"n must be in [0, {grid.n}]")
    if z_samples is None:
        z_samples = _z_exact_samples(model, grid, reps, seed, OUTER)
    reps = len(z_samples)
    vs = v_sampler if v_sampler is not None else SumNormSampler(grid, model)
    ratio = _v_samples(vs, reps, seed, VDRAW) / z_samples
    full = ratio.max(axis=1)
    if n == 0:
        return _mean_se(full)
    sub = ratio[:, equidistant_subset(grid.n, n)].max(axis=1)
    return _mean_se(full - sub)


def ef_partial_probability(model: ModelSpec, grid: Grid, n: int, eps: float = 0.0, mode: str = "any",
                           reps_outer: int = 1000, reps_inner: int = 200, seed: int = 0,
                           v_sampler: Optional[SpectralSampler] = None):
    """Probability that stopping after ``n`` sites leaves an error larger than f.

    Inner positive part {sup_x V/(Z_n + f) - max_subset V/Z_n}_+ per spectral
    draw, outer average of exp(-inner mean).
    """
    from .simulate import subset_first_order
    fam = increments_for(grid, model)
    order = subset_first_order(grid.n, n) if n < grid.n else None
    ef = ExtremalFunctions(fam, order)
    sub = equidistant_subset(grid.n, n)
    vs = v_sampler if v_sampler is not None else SumNormSampler(grid, model)
    vals = np.empty(reps_outer)
    for r in range(reps_outer):
        zn = ef.run(RngStream(seed, OUTER + r), n_steps=n).sample.values
        v, _ = vs.sample(RngStream(seed, INNER + r), reps_inner)
        if mode == "any":
            denom = zn
        elif mode == "abs":
            denom = zn + eps
        else:
            denom = (1.0 + eps) * zn
        d = (v / denom).max(axis=1) - (v[:, sub] / zn[sub]).max(axis=1)
        vals[r] = math.exp(-np.maximum(d, 0.0).mean())
    m, se = _mean_se(vals)
    return 1.0 - m, se
