import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxstab.exceptions import InvalidArgument, NumericFailure
from maxstab.gaussian import (CovMatrix, anchored_cov, corr_matrix, cov_from_variogram, cov_minvar,
                              factorize, minvar_constant, sample_gaussian)
from maxstab.model import Grid, ModelSpec, make_grid, make_grid_1d


def _grid(xs):
    return Grid(np.asarray(xs, dtype=float)[:, None])


class TestAnchored:
    def test_examples_alpha1(self):
        m = ModelSpec.brown_resnick(1.0, s=1.0)
        c = cov_from_variogram(_grid([0.0, 1.0, -1.0]), m, 0).entries
        assert c[1, 1] == pytest.approx(1.0)
        assert c[1, 2] == pytest.approx(0.0)

    def test_example_alpha15(self):
        m = ModelSpec.brown_resnick(1.5, s=1.0)
        c = cov_from_variogram(_grid([0.0, 0.5, 1.0]), m, 0).entries
        assert c[1, 2] == pytest.approx((0.5 ** 1.5 + 1 - 0.5 ** 1.5) / 2)
        assert c[1, 2] == pytest.approx(0.5)

    @pytest.mark.parametrize("alpha", [0.4, 1.0, 1.7])
    def test_invariants(self, alpha):
        g = make_grid([(-1, 1, 4), (0, 1, 3)])
        m = ModelSpec.brown_resnick(alpha, v=0.8)
        for anchor in (0, 5, 11):
            c = cov_from_variogram(g, m, anchor)
            e = c.entries
            assert np.all(e[anchor] == 0) and np.all(e[:, anchor] == 0)
            gam = m.variogram(g.points - g.points[anchor])
            np.testing.assert_allclose(np.diag(e), gam, atol=1e-12)
            np.testing.assert_allclose(e, e.T, atol=1e-12)
            assert c.anchor_index == anchor

    def test_anchor_range(self):
        m = ModelSpec.brown_resnick(1.0, v=1.0)
        with pytest.raises(InvalidArgument):
            cov_from_variogram(make_grid_1d(0, 1, 3), m, 3)

    def test_needs_br(self):
        with pytest.raises(InvalidArgument):
            cov_from_variogram(make_grid_1d(0, 1, 3), ModelSpec.extremal_t(1, 1), 0)


class TestMinVar:
    def test_constant(self):
        assert minvar_constant(1.0) == pytest.approx(1.0)
        a = 0.5
        expected = math.gamma((2 - a) / 2) * math.gamma((1 + a) / 2) / math.gamma(0.5)
        assert minvar_constant(a) == pytest.approx(expected)

    def test_alpha1_closed_form(self):
        m = ModelSpec.brown_resnick(1.0, s=1.0)
        g = make_grid_1d(-1, 1, 5)
        c = cov_minvar(g, m).entries
        np.testing.assert_allclose(np.diag(c), 0.5)
        np.testing.assert_allclose(c, 0.5 * (1 - g.distances()))
        assert c[0, -1] == pytest.approx(-0.5)

    def test_vertex_average_endpoint_variance(self):
        # alpha >= 1 goes through the vertex average; at alpha = 1 both forms meet
        m = ModelSpec.brown_resnick(1.0 + 1e-12, s=1.0)
        g = make_grid_1d(-1, 1, 5)
        c = cov_minvar(g, m).entries
        assert c[-1, -1] == pytest.approx(0.25 * m.variogram_r(2.0), rel=1e-9)
        assert c[-1, -1] == pytest.approx(0.5, rel=1e-9)

    @pytest.mark.parametrize("alpha", [1.0, 1.3, 1.8])
    @pytest.mark.parametrize("dims", [1, 2])
    def test_variogram_preserved(self, alpha, dims):
        axes = [(-1, 1, 5)] * dims
        g = make_grid(axes) if dims > 1 else make_grid_1d(-1, 1, 7)
        m = ModelSpec.brown_resnick(alpha, v=0.7)
        c = cov_minvar(g, m).entries
        d = np.diag(c)
        vg = d[:, None] + d[None, :] - 2 * c
        np.testing.assert_allclose(vg, m.variogram(g.lags()), atol=1e-9)

    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
    def test_variogram_preserved_closed_form(self, alpha):
        g = make_grid_1d(-1, 1, 9)
        m = ModelSpec.brown_resnick(alpha, s=0.7)
        c = cov_minvar(g, m).entries
        d = np.diag(c)
        np.testing.assert_allclose(d[:, None] + d[None, :] - 2 * c, m.variogram(g.lags()), atol=1e-9)

    def test_flags(self):
        g2 = make_grid([(-1, 1, 3), (-1, 1, 3)])
        assert not cov_minvar(g2, ModelSpec.brown_resnick(0.5, v=1)).minimal
        assert cov_minvar(g2, ModelSpec.brown_resnick(1.5, v=1)).minimal
        assert cov_minvar(make_grid_1d(-1, 1, 3), ModelSpec.brown_resnick(0.5, v=1)).minimal

    @pytest.mark.parametrize("alpha,s,r", [(0.3, 1.0, 1.0), (0.7, 0.5, 1.0), (1.0, 2.0, 2.0), (0.5, 1.0, 3.0)])
    def test_max_variance_below_anchored(self, alpha, s, r):
        g = make_grid_1d(-r, r, 41)
        m = ModelSpec.brown_resnick(alpha, s=s)
        mv = np.diag(cov_minvar(g, m).entries).max()
        orig = np.diag(cov_from_variogram(g, m, 20).entries).max()
        assert mv <= orig

    def test_half_width_must_cover(self):
        g = make_grid_1d(-1, 1, 5)
        with pytest.raises(InvalidArgument):
            cov_minvar(g, ModelSpec.brown_resnick(1.0, v=1), half_width=0.5)

    def test_psd(self):
        g = make_grid_1d(-1, 1, 31)
        for a in (0.5, 1.0, 1.5):
            c = cov_minvar(g, ModelSpec.brown_resnick(a, v=1)).entries
            assert np.linalg.eigvalsh(c).min() > -1e-9


class TestCorr:
    def test_values(self):
        m = ModelSpec.extremal_t(1.0, 0.5)
        c = corr_matrix(_grid([0.0, 0.5, 100.0]), m).entries
        np.testing.assert_allclose(np.diag(c), 1.0)
        assert c[0, 1] == pytest.approx(math.exp(-1))
        assert c[0, 2] == pytest.approx(0.0, abs=1e-80)

    def test_needs_et(self):
        with pytest.raises(InvalidArgument):
            corr_matrix(_grid([0.0]), ModelSpec.brown_resnick(1, v=1))


class TestFactorize:
    def test_identity(self):
        f = factorize(np.eye(4))
        np.testing.assert_array_equal(f.L, np.eye(4))
        assert f.jitter == 0.0

    def test_rank_one(self):
        a = np.array([1.0, 2.0, -0.5])
        c = np.outer(a, a)
        f = factorize(c)
        assert f.jitter > 0
        err = np.abs(f.L @ f.L.T - (c + f.jitter * np.eye(3))).max()
        assert err <= 1e-8 * max(1.0, np.abs(c).max())

    def test_pinned_anchor(self):
        g = make_grid_1d(-1, 1, 11)
        m = ModelSpec.brown_resnick(1.0, v=1.0)
        f = factorize(cov_from_variogram(g, m, 5))
        assert f.pinned[5] and f.pinned.sum() == 1
        w = sample_gaussian(f, np.random.default_rng(0), 50)
        assert np.all(w[:, 5] == 0.0)

    def test_asymmetric(self):
        with pytest.raises(InvalidArgument):
            factorize(np.array([[1.0, 0.5], [0.4, 1.0]]))

    def test_failure_has_diagnostics(self):
        with pytest.raises(NumericFailure) as ei:
            factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert "min_eig" in ei.value.diagnostics
        with pytest.raises(NumericFailure):
            factorize(np.array([[1.0, 0.0], [0.0, -1.0]]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10 ** 6))
    def test_reconstruction(self, n, seed):
        gen = np.random.default_rng(seed)
        b = gen.standard_normal((n, n))
        c = b @ b.T
        f = factorize(CovMatrix(c))
        err = np.abs(f.L @ f.L.T - (c + f.jitter * np.eye(n))).max()
        assert err <= 1e-8 * max(1.0, np.abs(c).max())
        assert np.allclose(np.triu(f.L, 1), 0.0)


class TestSample:
    def test_zero_factor(self):
        f = factorize(np.zeros((3, 3)))
        np.testing.assert_array_equal(sample_gaussian(f, np.random.default_rng(0)), np.zeros(3))

    def test_deterministic(self):
        f = factorize(np.eye(3))
        a = sample_gaussian(f, np.random.default_rng(4))
        b = sample_gaussian(f, np.random.default_rng(4))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (3,)

    def test_empirical_covariance(self):
        c = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, -0.3], [0.2, -0.3, 0.7]])
        w = sample_gaussian(factorize(c), np.random.default_rng(11), 100_000)
        emp = np.cov(w.T)
        assert np.abs(emp - c).max() < 0.02
        # three standard errors of each entry: var(w_i w_j) = c_ii c_jj + c_ij^2
        se = np.sqrt((np.outer(np.diag(c), np.diag(c)) + c ** 2) / len(w))
        assert np.all(np.abs(emp - c) <= 3 * se)
