"""Grids, model parameters, random streams and field samples."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidArgument

BROWN_RESNICK = "BrownResnick"
EXTREMAL_T = "ExtremalT"


@dataclass(frozen=True)
class LatticeMeta:
    origin: tuple
    step: tuple
    extent: tuple  # number of points per axis


class Grid:
    """Finite ordered set of locations in R^d.

    Points are stored as an ``(N, d)`` array; row order defines the site
    indices used everywhere else. Multi-dimensional lattices are ordered
    row-major (last axis fastest).
    """

    def __init__(self, points, lattice_meta: Optional[LatticeMeta] = None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidArgument("grid needs at least one point")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise InvalidArgument("grid points must be distinct")
        pts.setflags(write=False)
        self.points = pts
        self.lattice_meta = lattice_meta
        if lattice_meta is not None:
            self._check_lattice()

    def _check_lattice(self):
        meta = self.lattice_meta
        origin = np.asarray(meta.origin, dtype=float)
        step = np.asarray(meta.step, dtype=float)
        if len(origin) != self.dim or len(step) != self.dim:
            raise InvalidArgument("lattice descriptor has the wrong dimension")
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(step > 0, (self.points - origin) / np.where(step > 0, step, 1.0), 0.0)
        if not np.allclose(k, np.round(k), atol=1e-8):
            raise InvalidArgument("points are not on the declared lattice")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Grid(N={self.n}, d={self.dim})"

    def lags(self):
        """Pairwise difference vectors, shape ``(N, N, d)``."""
        return self.points[:, None, :] - self.points[None, :, :]

    def distances(self):
        return np.sqrt((self.lags() ** 2).sum(axis=-1))

    def nearest(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return int(np.argmin(((self.points - x) ** 2).sum(axis=1)))

    def bounding_box(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def subset(self, idx) -> "Grid":
        return Grid(self.points[np.asarray(idx)])


def make_grid_1d(a: float, b: float, n: int) -> Grid:
    """``n`` equidistant points from ``a`` to ``b`` inclusive."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"need at least one point, got N={n}")
    if not a < b:
        raise InvalidArgument(f"need a < b, got a={a}, b={b}")
    n = int(n)
    step = (b - a) / (n - 1) if n > 1 else b - a
    pts = np.linspace(a, b, n)
    return Grid(pts[:, None], LatticeMeta((float(a),), (float(step),), (n,)))


def make_grid(axes) -> Grid:
    """Regular lattice from per-axis ``(a, b, n)`` triples, row-major order."""
    coords = []
    origin, step, extent = [], [], []
    for a, b, n in axes:
        g = make_grid_1d(a, b, n)
        coords.append(g.points[:, 0])
        origin.append(g.lattice_meta.origin[0])
        step.append(g.lattice_meta.step[0])
        extent.append(int(n))
    pts = np.array(list(itertools.product(*coords)), dtype=float)
    return Grid(pts, LatticeMeta(tuple(origin), tuple(step), tuple(extent)))


def parse_grid(text: str) -> Grid:
    """Parse ``a:b:N`` (1-d) or ``a:b:N,a:b:N`` (row-major lattice)."""
    axes = []
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise InvalidArgument(f"grid axis must look like a:b:N, got {part!r}")
        try:
            axes.append((float(bits[0]), float(bits[1]), int(bits[2])))
        except ValueError as exc:
            raise InvalidArgument(f"bad grid axis {part!r}") from exc
    if len(axes) == 1:
        return make_grid_1d(*axes[0])
    return make_grid(axes)


@dataclass(frozen=True)
class ModelSpec:
    """Brown-Resnick (fractional variogram) or extremal-t (exponential correlation).

    Brown-Resnick models are stored in scale form, gamma(h) = ||h/s||^alpha;
    use :meth:`brown_resnick` to build one from the variance form
    gamma(h) = 2 v ||h||^alpha.
    """

    kind: str
    alpha: float = 1.0
    scale: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if self.kind == BROWN_RESNICK:
            if not 0.0 < self.alpha < 2.0:
                raise InvalidArgument(f"alpha must lie in (0, 2), got {self.alpha}")
            if not self.scale > 0:
                raise InvalidArgument(f"scale must be positive, got {self.scale}")
        elif self.kind == EXTREMAL_T:
            if not self.nu > 0:
                raise InvalidArgument(f"nu must be positive, got {self.nu}")
            if not self.scale > 0:
                raise InvalidArgument(f"scale must be positive, got {self.scale}")
        else:
            raise InvalidArgument(f"unknown model kind {self.kind!r}")

    @classmethod
    def brown_resnick(cls, alpha, v=None, s=None):
        if (v is None) == (s is None):
            raise InvalidArgument("give exactly one of v (variance form) or s (scale form)")
        if v is not None:
            if not v > 0:
                raise InvalidArgument(f"v must be positive, got {v}")
            if not 0.0 < alpha < 2.0:
                raise InvalidArgument(f"alpha must lie in (0, 2), got {alpha}")
            s = (2.0 * v) ** (-1.0 / alpha)
        return cls(BROWN_RESNICK, alpha=float(alpha), scale=float(s))

    @classmethod
    def extremal_t(cls, nu, s):
        return cls(EXTREMAL_T, nu=float(nu), scale=float(s))

    @property
    def variance_v(self) -> float:
        """The v of the variance form 2 v ||h||^alpha (Brown-Resnick only)."""
        return 0.5 * self.scale ** (-self.alpha)

    def variogram(self, h):
        """gamma at lag vectors ``h`` (coordinates along the last axis)."""
        h = np.asarray(h, dtype=float)
        return self.variogram_r(np.sqrt((h ** 2).sum(axis=-1)))

    def variogram_r(self, r):
        return (np.asarray(r, dtype=float) / self.scale) ** self.alpha

    def correlation_r(self, r):
        return np.exp(-np.asarray(r, dtype=float) / self.scale)

    def label(self) -> str:
        if self.kind == BROWN_RESNICK:
            return f"br(alpha={self.alpha:g},v={self.variance_v:g})"
        return f"et(nu={self.nu:g},s={self.scale:g})"


_PURPOSES = {"gamma": 0, "gauss": 1, "index": 2, "aux": 3, "accept": 4, "pareto": 5}


class RngStream:
    """Counter-based random stream identified by ``(seed, stream_id)``.

    Each purpose (Poisson arrivals, Gaussian draws, ...) gets its own Philox
    generator derived from the pair, so changing how many draws one purpose
    consumes never shifts another. Instances are single-owner.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._gens = {}

    def generator(self, purpose: str) -> np.random.Generator:
        gen = self._gens.get(purpose)
        if gen is None:
            key = _PURPOSES[purpose]
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, key))
            gen = np.random.Generator(np.random.Philox(ss))
            self._gens[purpose] = gen
        return gen

    def __getattr__(self, name):
        if name in _PURPOSES:
            return self.generator(name)
        raise AttributeError(name)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass
class FieldSample:
    values: np.ndarray
    stopping_time: int
    gaussian_draws: int
    exact: bool
    rep_tag: str
    stream_id: Optional[int] = None
    extra: dict = field(default_factory=dict, repr=False)


def frechet_cdf(z):
    """Unit Frechet CDF exp(-1/z); returns 0 for z <= 0 by convention."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def ks_frechet(samples) -> float:
    """Kolmogorov-Smirnov distance between a sample and the unit Frechet law."""
    x = np.sort(np.asarray(samples, dtype=float))
    r = len(x)
    f = frechet_cdf(x)
    i = np.arange(1, r + 1)
    return float(max(np.max(i / r - f), np.max(f - (i - 1) / r)))


def ks_critical_1pct(r: int) -> float:
    return 1.63 / math.sqrt(r)
