"""Spectral process samplers.

Every sampler draws non-negative vectors ``v`` on the grid with unit mean at
each site. ``sample`` returns the draws together with the number of
Gaussian field simulations each one cost, which is the cost unit used by the
simulation and benchmark code.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from .exceptions import InvalidArgument, UnsupportedRepresentation
from .gaussian import (
    CovMatrix,
    anchored_cov,
    corr_matrix,
    cov_from_variogram,
    cov_minvar,
    factorize,
    sample_gaussian,
)
from .model import BROWN_RESNICK, EXTREMAL_T, Grid, ModelSpec, RngStream

ORIGINAL = "Original"
SHIFTED = "Shifted"
MINVAR = "MinVar"
SUMNORM = "SumNorm"
SUPNORM = "SupNorm"
EXTREMALT = "ExtremalT"

REP_ALIASES = {
    "original": ORIGINAL, "orig": ORIGINAL,
    "shifted": SHIFTED, "shift": SHIFTED,
    "minvar": MINVAR,
    "sumnorm": SUMNORM, "dm": SUMNORM, "sum": SUMNORM,
    "supnorm": SUPNORM, "sn": SUPNORM, "sup": SUPNORM,
    "extremalt": EXTREMALT, "et": EXTREMALT,
}


def default_anchor(grid: Grid) -> int:
    """Grid site nearest the origin."""
    return grid.nearest(np.zeros(grid.dim))


class SpectralSampler:
    rep_tag = "abstract"
    #: almost-sure bound on sup v, or None when unbounded
    bound: Optional[float] = None

    def __init__(self, grid: Grid, model: Optional[ModelSpec]):
        self.grid = grid
        self.model = model
        self.n = grid.n

    def sample(self, rng: RngStream, size: int):
        raise NotImplementedError

    def __call__(self, rng: RngStream):
        v, _ = self.sample(rng, 1)
        return v[0]

    def __repr__(self):
        return f"{type(self).__name__}(rep={self.rep_tag}, N={self.n})"


def _unit_cost(size):
    return np.ones(size, dtype=np.int64)


class LogGaussianSampler(SpectralSampler):
    """v = exp(w - diag(C)/2) with w ~ N(0, C)."""

    def __init__(self, grid, model, cov: CovMatrix, rep_tag=ORIGINAL):
        super().__init__(grid, model)
        self.cov = cov
        self.factor = factorize(cov)
        self.half_var = 0.5 * np.diag(cov.entries)
        self.rep_tag = rep_tag

    def sample(self, rng, size):
        w = sample_gaussian(self.factor, rng.gauss, size)
        return np.exp(w - self.half_var), _unit_cost(size)


def sample_original_br(grid, model, anchor=None):
    """Sampler for the representation pinned to 0 at ``anchor`` (default: site nearest the origin)."""
    if anchor is None:
        anchor = default_anchor(grid)
    return LogGaussianSampler(grid, model, cov_from_variogram(grid, model, anchor), ORIGINAL)


def sample_minvar_br(grid, model, half_width=None):
    cov = cov_minvar(grid, model, half_width)
    s = LogGaussianSampler(grid, model, cov, MINVAR)
    s.minimal = cov.minimal
    return s


class BRIncrements:
    """Laws P_k of the Brown-Resnick spectral process normalized at site k.

    One draw of the anchored field ``w`` gives a draw from every P_k through
    ``exp(w(x) - w(x_k) - gamma(x - x_k) / 2)``, because the increments of a
    field with stationary increments only depend on the variogram.
    """

    def __init__(self, grid: Grid, model: ModelSpec, anchor=None):
        if model.kind != BROWN_RESNICK:
            raise InvalidArgument("BRIncrements needs a Brown-Resnick model")
        self.grid = grid
        self.model = model
        self.n = grid.n
        self.anchor = default_anchor(grid) if anchor is None else int(anchor)
        self.cov = cov_from_variogram(grid, model, self.anchor)
        self.factor = factorize(self.cov)
        # half_gamma[k, i] = gamma(x_i - x_k) / 2
        self.half_gamma = 0.5 * model.variogram_r(grid.distances())
        self.raw_width = self.n

    def raw(self, rng, size):
        return sample_gaussian(self.factor, rng.gauss, size)

    def transform(self, raw, k):
        raw = np.atleast_2d(raw)
        if np.ndim(k) == 0:
            return np.exp(raw - raw[:, k:k + 1] - self.half_gamma[k])
        k = np.asarray(k)
        rows = np.arange(len(k))
        return np.exp(raw - raw[rows, k][:, None] - self.half_gamma[k])


class ETIncrements:
    """Laws P_k of the extremal-t spectral process normalized at site k.

    P_k is the law of max(T, 0)^nu with T multivariate Student-t on nu + 1
    degrees of freedom, location rho(. - x_k) and scale
    (Sigma - rho rho^T) / (nu + 1). With w ~ N(0, Sigma) and an independent
    chi-square c on nu + 1 degrees of freedom,
    T = rho_k + (w - rho_k w_k) / sqrt(c).
    """

    def __init__(self, grid: Grid, model: ModelSpec):
        if model.kind != EXTREMAL_T:
            raise InvalidArgument("ETIncrements needs an extremal-t model")
        self.grid = grid
        self.model = model
        self.n = grid.n
        self.cov = corr_matrix(grid, model)
        self.factor = factorize(self.cov)
        self.rho = np.array(self.cov.entries)
        self.nu = model.nu
        self.raw_width = self.n + 1

    def raw(self, rng, size):
        w = sample_gaussian(self.factor, rng.gauss, size)
        c = rng.aux.chisquare(self.nu + 1.0, size)
        return np.hstack([w, c[:, None]])

    def transform(self, raw, k):
        raw = np.atleast_2d(raw)
        w = raw[:, :self.n]
        c = raw[:, self.n:]
        if np.ndim(k) == 0:
            rho = self.rho[k]
            t = rho + (w - rho * w[:, k:k + 1]) / np.sqrt(c)
        else:
            k = np.asarray(k)
            rho = self.rho[k]
            wk = w[np.arange(len(k)), k][:, None]
            t = rho + (w - rho * wk) / np.sqrt(c)
        return np.maximum(t, 0.0) ** self.nu


def increments_for(grid, model, anchor=None):
    if model.kind == BROWN_RESNICK:
        return BRIncrements(grid, model, anchor)
    return ETIncrements(grid, model)


class PkSampler(SpectralSampler):
    """Draws from P_k; the k-th coordinate equals 1 exactly."""

    def __init__(self, family, k: int):
        super().__init__(family.grid, family.model)
        if not 0 <= k < family.n:
            raise InvalidArgument(f"site index {k} out of range")
        self.family = family
        self.k = int(k)
        self.rep_tag = f"Pk({self.k})"

    def sample(self, rng, size):
        return self.family.transform(self.family.raw(rng, size), self.k), _unit_cost(size)


def sample_pk_br(grid, model, k, anchor=None):
    return PkSampler(BRIncrements(grid, model, anchor), k)


def sample_pk_extremal_t(grid, model, k):
    return PkSampler(ETIncrements(grid, model), k)


class ShiftedSampler(SpectralSampler):
    """Original representation shifted by a uniformly drawn grid site."""

    rep_tag = SHIFTED

    def __init__(self, grid, model, anchor=None):
        super().__init__(grid, model)
        if model.kind != BROWN_RESNICK:
            raise UnsupportedRepresentation("the shifted representation is defined for Brown-Resnick models")
        self.family = BRIncrements(grid, model, anchor)

    def sample(self, rng, size):
        shift = rng.index.integers(0, self.n, size)
        return self.family.transform(self.family.raw(rng, size), shift), _unit_cost(size)


def sample_shifted_br(grid, model, anchor=None):
    return ShiftedSampler(grid, model, anchor)


class SumNormSampler(SpectralSampler):
    """Spectral process with coordinates summing to N: N y / ||y||_1 with y ~ P_K, K uniform."""

    rep_tag = SUMNORM

    def __init__(self, grid, model, family=None):
        super().__init__(grid, model)
        self.family = family if family is not None else increments_for(grid, model)
        self.bound = float(self.n)

    def sample(self, rng, size):
        k = rng.index.integers(0, self.n, size)
        y = self.family.transform(self.family.raw(rng, size), k)
        return self.n * y / y.sum(axis=1, keepdims=True), _unit_cost(size)


def sample_sumnorm(grid, model):
    return SumNormSampler(grid, model)


def extremal_t_constant(nu: float) -> float:
    """sqrt(pi) 2^(1 - nu/2) / Gamma((nu + 1)/2)."""
    return math.exp(0.5 * math.log(math.pi) + (1 - nu / 2) * math.log(2.0) - gammaln((nu + 1) / 2))


class ExtremalTSampler(SpectralSampler):
    """v = c_nu max(w, 0)^nu, w standard Gaussian with exponential correlation."""

    rep_tag = EXTREMALT

    def __init__(self, grid, model):
        super().__init__(grid, model)
        if model.kind != EXTREMAL_T:
            raise InvalidArgument("ExtremalTSampler needs an extremal-t model")
        self.factor = factorize(corr_matrix(grid, model))
        self.c_nu = extremal_t_constant(model.nu)

    def sample(self, rng, size):
        w = sample_gaussian(self.factor, rng.gauss, size)
        return self.c_nu * np.maximum(w, 0.0) ** self.model.nu, _unit_cost(size)


def sample_extremal_t(grid, model):
    return ExtremalTSampler(grid, model)


class SupNormSampler(SpectralSampler):
    """Sup-normalized spectral process by rejection from sum-normalized proposals.

    A proposal ``v`` is accepted with probability ``max(v) / N``; the accepted
    profile is rescaled to have maximum ``theta``. ``theta`` is fixed at
    construction (pilot estimate or user value) and is also the exactness
    threshold; the running mean of ``max(v)`` over every proposal is kept in
    ``theta_running`` for reporting.
    """

    rep_tag = SUPNORM

    def __init__(self, proposal: SumNormSampler, theta: float, theta_se: float = 0.0):
        super().__init__(proposal.grid, proposal.model)
        if not theta > 0:
            raise InvalidArgument("theta must be positive")
        self.proposal = proposal
        self.theta = float(theta)
        self.theta_se = float(theta_se)
        self.bound = self.theta
        self.proposals = 0
        self.accepted = 0
        self._sum = 0.0
        self._sumsq = 0.0

    def _record(self, sup):
        self._sum += float(sup.sum())
        self._sumsq += float((sup * sup).sum())

    @property
    def theta_running(self):
        m = self.proposals
        if m == 0:
            return self.theta, math.inf
        mean = self._sum / m
        var = max(self._sumsq / m - mean * mean, 0.0)
        return mean, math.sqrt(var / max(m - 1, 1))

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposals if self.proposals else math.nan

    def sample_unit(self, rng, size):
        """Accepted profiles scaled to maximum 1, with proposals used per row."""
        n = self.n
        out = np.empty((size, n))
        cost = np.empty(size, dtype=np.int64)
        got = 0
        pending = 0
        chunk = max(16, int(math.ceil(1.25 * size * n / self.theta)))
        while got < size:
            v, _ = self.proposal.sample(rng, chunk)
            u = rng.accept.random(chunk)
            sup = v.max(axis=1)
            acc = np.flatnonzero(u * n < sup)
            need = size - got
            if len(acc) >= need:
                last = acc[need - 1]
                used = last + 1
                acc = acc[:need]
            else:
                used = chunk
            self.proposals += used
            self.accepted += len(acc)
            self._record(sup[:used])
            if len(acc):
                prev = np.concatenate([[-1], acc[:-1]])
                steps = acc - prev
                steps[0] += pending
                cost[got:got + len(acc)] = steps
                out[got:got + len(acc)] = v[acc] / sup[acc, None]
                pending = used - 1 - acc[-1]
            else:
                pending += used
            got += len(acc)
        return out, cost

    def sample(self, rng, size):
        y, cost = self.sample_unit(rng, size)
        return self.theta * y, cost


def estimate_theta_sup(grid: Grid, model: ModelSpec, reps: int, seed: int = 0, stream_id: int = 0,
                       sampler: Optional[SpectralSampler] = None):
    """Extremal coefficient estimate mean(max_i v(x_i)) with its standard error.

    Uses sum-normalized draws unless another sampler is supplied.
    """
    if reps < 2:
        raise InvalidArgument("need at least two replications")
    if grid.n == 1:
        return 1.0, 0.0
    s = sampler if sampler is not None else SumNormSampler(grid, model)
    rng = RngStream(seed, stream_id)
    sups = []
    left = reps
    while left:
        m = min(left, 4096)
        v, _ = s.sample(rng, m)
        sups.append(v.max(axis=1))
        left -= m
    sups = np.concatenate(sups)
    theta = math.fsum(sups) / reps
    se = float(np.std(sups, ddof=1) / math.sqrt(reps))
    if not (1.0 - 3 * se - 1e-12 <= theta <= grid.n + 3 * se + 1e-12):
        raise AssertionError(f"extremal coefficient {theta} outside [1, N]")
    return theta, se


def make_supnorm(grid, model, theta=None, pilot_reps=200_000, seed=0, stream_id=2**62):
    """SupNorm sampler with ``theta`` from a pilot run unless given.

    Accepted profiles are scaled to ``theta``, so the margins carry a scale
    error of theta / theta_true; the pilot is sized to keep it near 0.1%.
    """
    prop = SumNormSampler(grid, model)
    if theta is None:
        theta, se = estimate_theta_sup(grid, model, pilot_reps, seed, stream_id, sampler=prop)
    else:
        se = 0.0
    return SupNormSampler(prop, theta, se)


def sample_supnorm_rejection(sampler: SupNormSampler, rng: RngStream):
    v, cost = sampler.sample(rng, 1)
    return v[0], int(cost[0])


def sample_pareto(sampler: SupNormSampler, rng: RngStream, size: Optional[int] = None):
    """Sup-norm Pareto process: P * profile with P standard Pareto and max(profile) = 1."""
    m = 1 if size is None else size
    y, _ = sampler.sample_unit(rng, m)
    p = 1.0 / (1.0 - rng.pareto.random(m))
    out = p[:, None] * y
    return out[0] if size is None else out


def bivariate_theta_br(gamma_h):
    """Pairwise extremal coefficient of a Brown-Resnick field, 2 Phi(sqrt(gamma)/2)."""
    return 2.0 * norm.cdf(np.sqrt(np.asarray(gamma_h, dtype=float)) / 2.0)


def make_sampler(rep: str, grid: Grid, model: ModelSpec, theta=None, anchor=None,
                 half_width=None, pilot_reps=200_000, seed=0) -> SpectralSampler:
    """Build a sampler by representation name (case-insensitive aliases accepted)."""
    tag = REP_ALIASES.get(rep.lower().replace("-", "").replace("_", ""), rep)
    if tag == SUMNORM:
        return SumNormSampler(grid, model)
    if tag == SUPNORM:
        return make_supnorm(grid, model, theta, pilot_reps, seed)
    if model.kind == EXTREMAL_T:
        if tag in (EXTREMALT, ORIGINAL):
            return ExtremalTSampler(grid, model)
        raise UnsupportedRepresentation(f"{tag} is not available for extremal-t models")
    if tag == ORIGINAL:
        return sample_original_br(grid, model, anchor)
    if tag == SHIFTED:
        return ShiftedSampler(grid, model, anchor)
    if tag == MINVAR:
        return sample_minvar_br(grid, model, half_width)
    raise UnsupportedRepresentation(f"unknown representation {rep!r}")
