"""Covariance construction, Cholesky factorization and Gaussian draws."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .exceptions import InvalidArgument, NumericFailure
from .model import BROWN_RESNICK, EXTREMAL_T, Grid, ModelSpec

JITTER_START = 1e-12
JITTER_CAP = 1e-6
JITTER_FACTOR = 10.0


@dataclass(frozen=True)
class CovMatrix:
    entries: np.ndarray
    anchor_index: Optional[int] = None
    jitter_applied: float = 0.0
    minimal: bool = True

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def variances(self):
        return np.diag(self.entries).copy()


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular ``L`` with ``L L^T = C + jitter I`` on the free coordinates.

    Pinned coordinates (zero variance) have all-zero rows, so draws are
    exactly 0 there.
    """

    L: np.ndarray
    jitter: float
    pinned: np.ndarray

    @property
    def n(self):
        return self.L.shape[0]


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_br(model):
    if model.kind != BROWN_RESNICK:
        raise InvalidArgument(f"expected a Brown-Resnick model, got {model.kind}")


def anchored_cov(points, model: ModelSpec, anchor_point):
    """C(x, y) = (g(x - o) + g(y - o) - g(x - y)) / 2 for arbitrary points."""
    pts = np.asarray(points, dtype=float)
    o = np.asarray(anchor_point, dtype=float)
    go = model.variogram(pts - o)
    gxy = model.variogram(pts[:, None, :] - pts[None, :, :])
    return 0.5 * (go[:, None] + go[None, :] - gxy)


def cov_from_variogram(grid: Grid, model: ModelSpec, anchor: int) -> CovMatrix:
    """Covariance of the Gaussian field pinned to 0 at grid site ``anchor``."""
    _check_br(model)
    if not 0 <= int(anchor) < grid.n:
        raise InvalidArgument(f"anchor index {anchor} out of range for N={grid.n}")
    anchor = int(anchor)
    c = anchored_cov(grid.points, model, grid.points[anchor])
    c[anchor, :] = 0.0
    c[:, anchor] = 0.0
    return CovMatrix(_freeze(c), anchor_index=anchor)


def minvar_constant(alpha: float) -> float:
    """Gamma((2-a)/2) Gamma((1+a)/2) / Gamma(1/2)."""
    return math.exp(gammaln((2 - alpha) / 2) + gammaln((1 + alpha) / 2) - gammaln(0.5))


def _rectangle(grid, half_width):
    lo, hi = grid.bounding_box()
    center = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    if half_width is not None:
        hw = np.broadcast_to(np.asarray(half_width, dtype=float), r.shape)
        if np.any(hw < r - 1e-12):
            raise InvalidArgument("half_width does not cover the grid")
        r = hw.copy()
    return center, r


def cov_minvar(grid: Grid, model: ModelSpec, half_width=None) -> CovMatrix:
    """Covariance of the reduced-variance field on the grid's bounding rectangle.

    The rectangle is centred on the grid's bounding box; ``half_width`` widens
    it. In one dimension with alpha <= 1 the closed-form stationary covariance
    is used; otherwise the field minus the average over rectangle vertices,
    which is only flagged ``minimal`` when alpha >= 1 or d = 1.
    """
    _check_br(model)
    center, r = _rectangle(grid, half_width)
    d = grid.dim
    a, s = model.alpha, model.scale
    if d == 1 and a <= 1.0:
        dist = grid.distances()
        c = 0.5 * s ** (-a) * (minvar_constant(a) * r[0] ** a - dist ** a)
        return CovMatrix(_freeze(c), minimal=True)
    verts = np.array(list(itertools.product(*[(center[i] - r[i], center[i] + r[i]) for i in range(d)])))
    verts = np.unique(verts, axis=0)
    # anchored covariance on grid + vertices, then the linear map x -> x - mean(vertices)
    pts = np.vstack([grid.points, verts])
    big = anchored_cov(pts, model, center)
    n, m = grid.n, len(verts)
    A = np.zeros((n, n + m))
    A[:, :n] = np.eye(n)
    A[:, n:] = -1.0 / m
    c = A @ big @ A.T
    c = 0.5 * (c + c.T)
    return CovMatrix(_freeze(c), minimal=not (d >= 2 and a < 1.0))


def corr_matrix(grid: Grid, model: ModelSpec) -> CovMatrix:
    """Exponential correlation exp(-||x - y|| / s)."""
    if model.kind != EXTREMAL_T:
        raise InvalidArgument(f"expected an extremal-t model, got {model.kind}")
    c = model.correlation_r(grid.distances())
    return CovMatrix(_freeze(c))


def factorize(cov, pin_tol: float = 0.0) -> CholFactor:
    """Cholesky factor with geometric jitter escalation.

    Zero-variance coordinates are pinned instead of jittered. Jitter runs
    from 1e-12 to 1e-6 times the mean diagonal, by factors of 10, after a
    first attempt without jitter.
    """
    c = np.asarray(cov.entries if isinstance(cov, CovMatrix) else cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidArgument("covariance must be square")
    n = c.shape[0]
    asym = np.max(np.abs(c - c.T)) if n else 0.0
    if asym > 1e-12 * max(1.0, np.max(np.abs(c))):
        raise InvalidArgument(f"covariance is not symmetric (max asymmetry {asym:.3g})")
    c = 0.5 * (c + c.T)
    diag = np.diag(c)
    tol = pin_tol * max(1.0, float(np.abs(diag).max(initial=0.0)))
    if np.any(diag < -max(tol, 1e-14)):
        raise NumericFailure("covariance has a negative variance",
                             {"min_diag": float(diag.min()), "n": n})
    pinned = diag <= tol
    free = np.flatnonzero(~pinned)
    L = np.zeros((n, n))
    if len(free) == 0:
        return CholFactor(_freeze(L), 0.0, _freeze_bool(pinned))
    sub = c[np.ix_(free, free)]
    scale = np.trace(c) / n
    jit = 0.0
    ladder = [0.0]
    j = JITTER_START
    while j <= JITTER_CAP * (1 + 1e-9):
        ladder.append(j)
        j *= JITTER_FACTOR
    for jit_rel in ladder:
        jit = jit_rel * scale
        try:
            lsub = np.linalg.cholesky(sub + jit * np.eye(len(free)))
        except np.linalg.LinAlgError:
            continue
        L[np.ix_(free, free)] = lsub
        return CholFactor(_freeze(L), jit, _freeze_bool(pinned))
    eig = np.linalg.eigvalsh(sub)
    raise NumericFailure(
        "covariance could not be factorized at the maximum jitter",
        {"min_eig": float(eig[0]), "max_eig": float(eig[-1]),
         "cond": float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf,
         "jitter": jit, "n": n},
    )


def _freeze_bool(a):
    a = np.array(a, dtype=bool)
    a.setflags(write=False)
    return a


def sample_gaussian(factor: CholFactor, gen: np.random.Generator, size: Optional[int] = None):
    """Draw ``L xi`` with ``xi`` i.i.d. standard normal.

    Each returned row is one Gaussian process draw (the unit in which the
    simulation cost is counted).
    """
    n = factor.n
    if size is None:
        return factor.L @ gen.standard_normal(n)
    xi = gen.standard_normal((size, n))
    return xi @ factor.L.T
