"""Threshold stopping and extremal functions samplers for max-stable fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels as _kernels
from .exceptions import InvalidArgument, RunawayStop
from .model import FieldSample, Grid, ModelSpec, RngStream
from .spectral import SpectralSampler, increments_for

MAX_ITERATIONS = 10 ** 6
_TS_CHUNKS = (8, 16, 32, 64, 128, 256, 512)
_EF_ROWS = 4
_BUFFER = 64


@dataclass
class RunStats:
    T: int
    N_W: int
    exact_flag: bool


@dataclass
class Snapshot:
    tau: float
    T: int
    N_W: int
    values: np.ndarray


@dataclass
class StopTrace:
    """Per-draw record of a threshold-stopping run.

    ``g[j]`` is Gamma_{j+2} * min z after draw j+1, so the run with threshold
    tau would have stopped after the first draw with ``g > tau``. ``changed[j]``
    tells whether draw j+1 raised the field anywhere.
    """

    g: np.ndarray
    changed: np.ndarray
    cum_nw: np.ndarray

    def critical_tau(self) -> float:
        """Smallest threshold whose output equals this run's final field.

        Any smaller threshold stops before the last draw that changed the
        field, so it produces a different sample.
        """
        idx = np.flatnonzero(self.changed)
        if len(idx) == 0:
            return 0.0
        last = idx[-1]
        if last == 0:
            return 0.0
        return float(self.g[:last].max())

    def stop_index(self, tau: float) -> int:
        """Stopping time T_tau (number of draws) for ``tau`` up to the traced one."""
        hit = np.flatnonzero(self.g > tau)
        if len(hit) == 0:
            raise InvalidArgument("threshold above the traced run")
        return int(hit[0]) + 1

    def cost(self, tau: float):
        t = self.stop_index(tau)
        return t, int(self.cum_nw[t - 1])


def _exact_flag(sampler, tau):
    return sampler.bound is not None and tau >= sampler.bound


def threshold_stopping(sampler: SpectralSampler, tau: float, rng: RngStream,
                       max_iterations: int = MAX_ITERATIONS,
                       snapshot_taus: Sequence[float] = (), trace: bool = False,
                       kernels=None):
    """One realization by threshold stopping.

    Gamma <- Exp(1); while tau / Gamma >= min z: draw v, z <- max(z, v / Gamma),
    Gamma <- Gamma + Exp(1). The run with threshold ``tau`` is exact when the
    sampler is almost surely bounded by ``tau``.

    ``snapshot_taus`` records the field at the stopping times of smaller
    thresholds on the same stream; ``trace`` keeps the per-draw stopping
    statistics (see :class:`StopTrace`).
    Returns ``(FieldSample, RunStats)``.
    """
    if not tau > 0:
        raise InvalidArgument(f"threshold must be positive, got {tau}")
    if max_iterations < 1:
        raise InvalidArgument("max_iterations must be at least 1")
    ts_advance = kernels[0] if kernels is not None else _kernels.ts_advance
    n = sampler.n
    z = np.zeros(n)
    owner = np.full(n, -1, dtype=np.int64)
    gamma = float(rng.gamma.standard_exponential())
    pending = sorted(float(t) for t in snapshot_taus if 0 < t < tau)
    pending.append(float(tau))
    snaps = []
    g_parts, ch_parts, nw_parts = [], [], []
    T = 0
    nw = 0
    ci = 0
    while True:
        size = min(_TS_CHUNKS[min(ci, len(_TS_CHUNKS) - 1)], max_iterations - T)
        ci += 1
        if size <= 0:
            raise RunawayStop(f"no stop after {T} draws (tau={tau})", z.copy(), T, nw)
        v, cost = sampler.sample(rng, size)
        v = np.ascontiguousarray(v)
        incr = rng.gamma.standard_exponential(size)
        g = np.empty(size)
        ch = np.zeros(size, dtype=np.uint8)
        pos = 0
        done = False
        while pos < size:
            c, gamma, stopped = ts_advance(z, owner, T, v[pos:], incr[pos:], gamma, pending[0],
                                          g[pos:], ch[pos:])
            nw += int(cost[pos:pos + c].sum())
            T += c
            pos += c
            if stopped:
                m = z.min()
                while len(pending) > 1 and pending[0] / gamma < m:
                    snaps.append(Snapshot(pending.pop(0), T, nw, z.copy()))
                if pending[0] / gamma < m:
                    done = True
                    break
        if trace:
            g_parts.append(g[:pos])
            ch_parts.append(ch[:pos].astype(bool))
            nw_parts.append(cost[:pos])
        if done:
            break
    sample = FieldSample(z, T, nw, _exact_flag(sampler, tau), sampler.rep_tag, rng.stream_id)
    sample.extra["owner"] = owner
    if snaps:
        sample.extra["snapshots"] = snaps
    if trace:
        sample.extra["trace"] = StopTrace(np.concatenate(g_parts), np.concatenate(ch_parts),
                                          np.cumsum(np.concatenate(nw_parts)))
    return sample, RunStats(T, nw, sample.exact)


class _Stream:
    """Sequential reader over chunked draws with peek/advance."""

    def __init__(self, fill, chunk=_BUFFER):
        self._fill = fill
        self._chunk = chunk
        self._buf = None
        self._i = 0

    def peek(self, k):
        have = 0 if self._buf is None else len(self._buf) - self._i
        if have < k:
            new = self._fill(max(self._chunk, k - have))
            if have:
                new = np.concatenate([self._buf[self._i:], new])
            self._buf = new
            self._i = 0
        return self._buf[self._i:self._i + k]

    def advance(self, k):
        self._i += k

    def take1(self):
        x = self.peek(1)[0]
        self._i += 1
        return x


@dataclass
class EFResult:
    sample: FieldSample
    stats: RunStats
    order: np.ndarray
    draws: np.ndarray          # P draws per step, in visiting order
    accepted: np.ndarray       # whether a new extremal function was found at each step
    n_steps: int
    functions: Optional[np.ndarray] = None  # extremal functions, original site order
    partial_values: Optional[np.ndarray] = None
    partial_T: Optional[int] = None

    @property
    def partial_error(self) -> bool:
        """Whether steps after ``n_steps`` added an extremal function."""
        return bool(self.accepted[self.n_steps:].any())


class ExtremalFunctions:
    """Exact sampler that simulates only the extremal functions.

    ``order`` fixes the site visiting order (default: grid order). The
    output law does not depend on it, only the cost distribution does.
    """

    def __init__(self, family, order=None, kernels=None):
        self.family = family
        self.n = family.n
        if order is None:
            order = np.arange(self.n)
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.n)):
            raise InvalidArgument("order must be a permutation of the sites")
        self.order = order
        self.inverse = np.argsort(order)
        self._ef_advance = kernels[1] if kernels is not None else _kernels.ef_advance

    def run(self, rng: RngStream, n_steps: Optional[int] = None, continue_full: bool = False,
            record: bool = False, max_iterations: int = MAX_ITERATIONS) -> EFResult:
        n = self.n
        if n_steps is None:
            n_steps = n
        if not 1 <= n_steps <= n:
            raise InvalidArgument(f"number of sites must be in [1, {n}], got {n_steps}")
        last = n if continue_full else n_steps
        fam = self.family
        order = self.order
        raw = _Stream(lambda m: fam.raw(rng, m))
        exps = _Stream(lambda m: rng.gamma.standard_exponential(m), chunk=4 * _BUFFER)
        z = np.zeros(n)
        draws = np.zeros(n, dtype=np.int64)
        accepted = np.zeros(n, dtype=bool)
        funcs = [] if record else None
        total = 0
        partial_values = None
        partial_T = None
        for pos in range(last):
            if pos == n_steps and continue_full:
                partial_values = z[self.inverse].copy()
                partial_T = total
            gamma = float(exps.take1())
            k = int(order[pos])
            while 1.0 / gamma >= z[pos]:
                rows = raw.peek(_EF_ROWS)
                v = np.ascontiguousarray(fam.transform(rows, k)[:, order])
                incr = exps.peek(_EF_ROWS)
                ru, iu, gamma, status = self._ef_advance(z, v, incr, gamma, pos)
                raw.advance(ru)
                exps.advance(iu)
                draws[pos] += ru
                total += ru
                if status == 1:
                    accepted[pos] = True
                    if record:
                        funcs.append(v[ru - 1] / gamma)
                    break
                if status == 2:
                    break
                if total >= max_iterations:
                    raise RunawayStop(f"no completion after {total} draws", z[self.inverse].copy(), total, total)
        values = z[self.inverse].copy()
        exact = n_steps == n
        if partial_values is None:
            partial_values, partial_T = values, total
        sample = FieldSample(partial_values, int(partial_T), int(partial_T), exact, "EF", rng.stream_id)
        if continue_full:
            sample.extra["full_values"] = values
            sample.extra["full_T"] = total
        res = EFResult(sample, RunStats(sample.stopping_time, sample.gaussian_draws, exact), order,
                       draws, accepted, n_steps, partial_values=partial_values, partial_T=partial_T)
        if record:
            res.functions = np.array(funcs).reshape(-1, n)[:, self.inverse]
        return res


def equidistant_subset(n_total: int, n: int) -> np.ndarray:
    """``n`` equally spaced site indices including both ends."""
    if not 1 <= n <= n_total:
        raise InvalidArgument(f"subset size must be in [1, {n_total}]")
    if n == 1:
        return np.array([0])
    return np.unique(np.round(np.linspace(0, n_total - 1, n)).astype(np.int64))


def subset_first_order(n_total: int, n: int) -> np.ndarray:
    sub = equidistant_subset(n_total, n)
    rest = np.setdiff1d(np.arange(n_total), sub)
    return np.concatenate([sub, rest])


def extremal_functions(model: ModelSpec, grid: Grid, rng: RngStream, order=None, family=None):
    """Exact sample on all N sites. Returns ``(FieldSample, RunStats)``."""
    fam = family if family is not None else increments_for(grid, model)
    res = ExtremalFunctions(fam, order).run(rng)
    return res.sample, res.stats


def extremal_functions_partial(model: ModelSpec, grid: Grid, n: int, rng: RngStream, family=None):
    """Extremal functions of an equidistant subset of ``n`` sites only.

    Exact on the subset. With ``n = N`` this is the full sampler in grid order.
    """
    fam = family if family is not None else increments_for(grid, model)
    order = None if n == grid.n else subset_first_order(grid.n, n)
    res = ExtremalFunctions(fam, order).run(rng, n_steps=n)
    return res.sample, res.stats
