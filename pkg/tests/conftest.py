import numpy as np
import pytest

from maxstab.model import ModelSpec, RngStream, make_grid_1d
from maxstab.spectral import SpectralSampler


class ConstantSampler(SpectralSampler):
    """Degenerate spectral process v = 1 everywhere (variogram identically 0)."""

    rep_tag = "Constant"

    def __init__(self, grid):
        super().__init__(grid, None)
        self.bound = 1.0

    def sample(self, rng, size):
        rng.gauss.standard_normal(size)
        return np.ones((size, self.n)), np.ones(size, dtype=np.int64)


class ConstantFamily:
    """P_k family of the degenerate process: every draw is identically 1."""

    def __init__(self, grid):
        self.grid = grid
        self.model = None
        self.n = grid.n
        self.raw_width = grid.n

    def raw(self, rng, size):
        return rng.gauss.standard_normal((size, self.n))

    def transform(self, raw, k):
        return np.ones(np.atleast_2d(raw).shape)


class ScriptedGen:
    """Stands in for a Generator, returning scripted exponential values."""

    def __init__(self, values):
        self.values = list(values)

    def standard_exponential(self, size=None):
        if size is None:
            return self.values.pop(0)
        out = np.array(self.values[:size] + [1e9] * max(0, size - len(self.values)))
        del self.values[:size]
        return out


class ScriptedStream(RngStream):
    def __init__(self, exps, seed=0):
        super().__init__(seed, 0)
        self._gens["gamma"] = ScriptedGen(exps)


@pytest.fixture
def br1():
    return ModelSpec.brown_resnick(1.0, v=1.0)


@pytest.fixture
def grid21():
    return make_grid_1d(-1.0, 1.0, 21)


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
