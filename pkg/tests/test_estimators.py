import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import T1_X, T1_Y, T2_X, T2_Y, T3_Y, random_problem, rel_err, score_err
from ssreg import oracle
from ssreg.errors import DimensionMismatch, EmptyAccumulator, InverseTransformDomain, NegativeLambda
from ssreg.estimators import (
    BoxCoxEntry,
    RidgeNotStabilized,
    fit,
    fit_boxcox_all,
    fit_linear,
    fit_ridge,
    fit_weighted,
    loglik_linear,
    mse,
    predict,
    ridge_trace,
    select_boxcox,
)
from ssreg.suffstats import BoxCoxSS, LinRegSS, WeightedSS

T2_LOGLIK = -1.5 * math.log(2 * math.pi / 18) - 1.5


def lin(X, y):
    return LinRegSS(np.shape(X)[1]).update_batch(X, y)


def dup_column_data(rng, n=30):
    z = rng.normal(size=n)
    X = np.column_stack([np.ones(n), z, z])
    y = 1.0 + 2.0 * z + 0.1 * rng.normal(size=n)
    return X, y


class TestFitLinear:
    def test_t1_exact(self):
        f = fit_linear(lin(T1_X, T1_Y))
        np.testing.assert_allclose(f.beta, [1.0, 2.0], atol=1e-14)
        assert f.sigma2 == 0.0 and f.degenerate and f.score == math.inf

    def test_t2(self):
        f = fit_linear(lin(T2_X, T2_Y))
        np.testing.assert_allclose(f.beta, [7 / 6, 1.5], rtol=1e-14)
        assert f.sigma2 == pytest.approx(1 / 18, rel=1e-13)
        assert f.score == pytest.approx(T2_LOGLIK, rel=1e-12)
        assert f.score == pytest.approx(0.0787, abs=1e-4)
        ref = oracle.dense_ols(T2_X, T2_Y)
        assert rel_err(f.beta, ref.beta) <= 1e-12
        assert rel_err(f.cov, ref.cov) <= 1e-12
        assert not f.used_generalized_inverse

    def test_pinv_example(self):
        ss = LinRegSS(2, n=2, s_yy=20.0, s_xy=np.array([10.0, 10.0]))
        ss._xx[:] = [[5.0, 5.0], [0.0, 5.0]]
        f = fit_linear(ss)
        assert f.used_generalized_inverse
        np.testing.assert_allclose(f.beta, [1.0, 1.0], rtol=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyAccumulator):
            fit_linear(LinRegSS(2))


class TestLoglik:
    def test_at_estimate(self):
        ss = lin(T2_X, T2_Y)
        assert loglik_linear(ss, [7 / 6, 1.5], 1 / 18) == pytest.approx(T2_LOGLIK, rel=1e-12)

    def test_zero_beta(self):
        ss = lin(T2_X, T2_Y)
        assert loglik_linear(ss, [0.0, 0.0], 1.0) == pytest.approx(-1.5 * math.log(2 * math.pi) - 13.0, rel=1e-14)

    def test_unit_variance(self):
        ss = lin(T2_X, T2_Y)
        expected = -1.5 * math.log(2 * math.pi) - (1 / 6) / 2
        assert loglik_linear(ss, [7 / 6, 1.5], 1.0) == pytest.approx(expected, rel=1e-12)


class TestFitWeighted:
    def test_unit_weights(self):
        f = fit_weighted(WeightedSS(2).update_batch(T1_X, T1_Y, [1.0, 1.0]))
        np.testing.assert_allclose(f.beta, [1.0, 2.0], atol=1e-14)

    def test_zero_weight_row(self):
        f = fit_weighted(WeightedSS(2).update_batch(T2_X, T2_Y, [1.0, 1.0, 0.0]))
        np.testing.assert_allclose(f.beta, [1.0, 2.0], atol=1e-13)
        assert f.sigma2 == 0.0 and f.n == 3

    def test_all_zero_weights(self):
        f = fit_weighted(WeightedSS(2).update_batch(T2_X, T2_Y, [0.0, 0.0, 0.0]))
        assert f.score == 0.0 and f.used_generalized_inverse
        np.testing.assert_array_equal(f.beta, [0.0, 0.0])

    def test_matches_oracle(self, rng):
        X, y, _ = random_problem(rng, 200, 5)
        w = rng.uniform(0.1, 3.0, size=200)
        f = fit_weighted(WeightedSS(5).update_batch(X, y, w))
        ref = oracle.dense_weighted(X, y, w)
        assert rel_err(f.beta, ref.beta) <= 1e-10
        assert rel_err(f.sigma2, ref.sigma2) <= 1e-10
        assert score_err(f.score, ref.score) <= 1e-10


class TestBoxCox:
    def test_t3_log_is_exact(self):
        (entry,) = fit_boxcox_all(BoxCoxSS(2, grid=[0]).update_batch(T2_X, T3_Y))
        np.testing.assert_allclose(entry.fit.beta, [0.0, 1.0], atol=1e-13)
        assert entry.fit.sigma2 == 0.0 and entry.profile_loglik == math.inf

    def test_t2_identity_power(self):
        (entry,) = fit_boxcox_all(BoxCoxSS(2, grid=[1]).update_batch(T2_X, T2_Y))
        np.testing.assert_allclose(entry.fit.beta, [1 / 6, 1.5], rtol=1e-12)
        assert entry.fit.sigma2 == pytest.approx(1 / 18, rel=1e-12)
        assert entry.profile_loglik == pytest.approx(T2_LOGLIK, rel=1e-11)

    def test_grid_matches_oracle(self, rng):
        X, y, _ = random_problem(rng, 300, 4, positive=True)
        grid = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5]
        got = fit_boxcox_all(BoxCoxSS(4, grid=grid).update_batch(X, y))
        ref = oracle.dense_boxcox(X, y, grid)
        for e, (c, rf, prof) in zip(got, ref):
            assert e.c == c
            assert rel_err(e.fit.beta, rf.beta) <= 1e-9
            assert rel_err(e.fit.sigma2, rf.sigma2) <= 1e-9
            assert score_err(e.profile_loglik, prof) <= 1e-9


class TestSelectBoxCox:
    def _entry(self, c, ll):
        return BoxCoxEntry(c, None, ll)

    def test_infinite_wins(self):
        assert select_boxcox([self._entry(0.0, math.inf), self._entry(1.0, 0.0789)]).c == 0.0

    def test_single(self):
        assert select_boxcox([self._entry(0.7, -3.0)]).c == 0.7

    def test_tie_prefers_smaller_c(self):
        assert select_boxcox([self._entry(0.5, 1.0), self._entry(-0.5, 1.0)]).c == -0.5

    def test_tie_prefers_smaller_abs(self):
        assert select_boxcox([self._entry(-1.0, 1.0), self._entry(0.5, 1.0)]).c == 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            select_boxcox([])


class TestFitRidge:
    def test_lambda_zero(self):
        f = fit_ridge(lin(T1_X, T1_Y), 0.0)
        np.testing.assert_allclose(f.beta, [1.0, 2.0], atol=1e-14)

    def test_lambda_one(self):
        f = fit_ridge(lin(T1_X, T1_Y), 1.0)
        np.testing.assert_allclose(f.beta, [1.0, 1.0], rtol=1e-14)
        assert f.sigma2 == pytest.approx(1.5, rel=1e-14)
        np.testing.assert_allclose(f.cov, 0.3 * np.eye(2), atol=1e-14)
        ref = oracle.dense_ridge(T1_X, T1_Y, 1.0)
        assert rel_err(f.cov, ref.cov) <= 1e-12
        assert score_err(f.score, ref.score) <= 1e-12

    def test_shrinks_to_zero(self):
        ss = lin(T1_X, T1_Y)
        norms = [np.linalg.norm(fit_ridge(ss, lam).beta) for lam in (1.0, 1e2, 1e4, 1e6, 1e9)]
        assert all(b < a for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 1e-8

    def test_negative(self):
        with pytest.raises(NegativeLambda):
            fit_ridge(lin(T1_X, T1_Y), -0.1)


class TestRidgeTrace:
    def test_t1_not_stabilized(self):
        with pytest.warns(RidgeNotStabilized):
            tr = ridge_trace(lin(T1_X, T1_Y), [0.0, 1.0])
        rows = list(tr.rows())
        np.testing.assert_allclose(rows[0][1], [1.0, 2.0], atol=1e-14)
        np.testing.assert_allclose(rows[1][1], [1.0, 1.0], rtol=1e-14)
        assert tr.selected_lambda == 1.0 and tr.warning

    def test_single_point(self):
        with pytest.warns(RidgeNotStabilized):
            tr = ridge_trace(lin(T1_X, T1_Y), [0.0])
        assert tr.selected_lambda == 0.0

    def test_duplicate_columns(self, rng):
        X, y = dup_column_data(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RidgeNotStabilized)
            tr = ridge_trace(lin(X, y), [0.0, 0.1])
        assert tr.fits[0].used_generalized_inverse
        assert not tr.fits[1].used_generalized_inverse
        assert np.linalg.eigvalsh(lin(X, y).S_xx + 0.1 * np.eye(3)).min() > 0

    def test_stabilizes(self, rng):
        X, y, _ = random_problem(rng, 5000, 4, sigma=0.5)
        grid = [0.0, 0.1, 0.2, 0.3]
        with warnings.catch_warnings():
            warnings.simplefilter("error", RidgeNotStabilized)
            tr = ridge_trace(lin(X, y), grid)
        assert tr.selected_lambda == 0.0 and tr.warning is None
        assert len(tr.fits) == 4 and tr.selected is tr.fits[0]

    def test_rejects_bad_grids(self):
        ss = lin(T1_X, T1_Y)
        with pytest.raises(NegativeLambda):
            ridge_trace(ss, [-1.0, 0.0])
        with pytest.raises(ValueError):
            ridge_trace(ss, [1.0, 0.5])
        with pytest.raises(ValueError):
            ridge_trace(ss, [])


class TestPredict:
    def test_t1_point(self):
        assert predict(fit_linear(lin(T1_X, T1_Y)), [1.0, 1.0]) == pytest.approx(3.0, rel=1e-14)

    def test_t2_point(self):
        assert predict(fit_linear(lin(T2_X, T2_Y)), [1.0, 0.0]) == pytest.approx(7 / 6, rel=1e-14)

    def test_boxcox_inverse(self):
        (entry,) = fit_boxcox_all(BoxCoxSS(2, grid=[0]).update_batch(T2_X, T3_Y))
        assert predict(entry.fit, [1.0, 2.0], inverse_transform=True) == pytest.approx(math.e ** 2, rel=1e-12)

    def test_batch(self):
        f = fit_linear(lin(T2_X, T2_Y))
        np.testing.assert_allclose(predict(f, T2_X), T2_X @ f.beta)

    def test_inverse_domain(self):
        (entry,) = fit_boxcox_all(BoxCoxSS(2, grid=[1.0]).update_batch(T2_X, T2_Y))
        with pytest.raises(InverseTransformDomain):
            predict(entry.fit, [1.0, -10.0], inverse_transform=True)
        assert predict(entry.fit, [1.0, 2.0], inverse_transform=True) == pytest.approx(1 / 6 + 3.0 + 1.0)

    def test_dimension(self):
        with pytest.raises(DimensionMismatch):
            predict(fit_linear(lin(T2_X, T2_Y)), [1.0, 2.0, 3.0])


class TestMse:
    def test_examples(self):
        assert mse([1, 2], [1, 2]) == 0.0
        assert mse([0, 2], [1, 1]) == 1.0

    def test_in_sample_equals_sigma2(self):
        f = fit_linear(lin(T2_X, T2_Y))
        assert mse(T2_Y, predict(f, T2_X)) == pytest.approx(1 / 18, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mse([1.0], [1.0, 2.0])


def test_dispatch():
    assert fit(lin(T2_X, T2_Y)).model_kind == "linear"
    assert fit(lin(T1_X, T1_Y), lam=1.0).model_kind == "ridge"
    assert fit(WeightedSS(2).update_batch(T2_X, T2_Y, [1, 1, 1])).model_kind == "weighted"
    assert fit(BoxCoxSS(2, grid=[0, 1]).update_batch(T2_X, T3_Y)).params["c"] == 0


# -- properties ---------------------------------------------------------------

problems = st.builds(
    lambda seed, n, p, sigma: random_problem(np.random.default_rng(seed), n, p, sigma),
    st.integers(0, 2**32 - 1),
    st.integers(25, 400),
    st.integers(1, 8),
    st.floats(0.05, 5.0),
)


@given(problems)
def test_normal_equation_residual(problem):
    X, y, _ = problem
    ss = lin(X, y)
    f = fit_linear(ss)
    assert not f.used_generalized_inverse
    assert np.linalg.norm(ss.S_xx @ f.beta - ss.s_xy) <= 1e-8 * np.linalg.norm(ss.s_xy)


@given(problems)
def test_ridge_zero_is_linear(problem):
    X, y, _ = problem
    ss = lin(X, y)
    a, b = fit_ridge(ss, 0.0), fit_linear(ss)
    assert rel_err(a.beta, b.beta) <= 1e-12
    assert rel_err(a.sigma2, b.sigma2) <= 1e-12
    assert rel_err(a.cov, b.cov) <= 1e-12


@given(problems)
def test_in_sample_mse_is_sigma2(problem):
    X, y, _ = problem
    f = fit_linear(lin(X, y))
    assert rel_err(mse(y, predict(f, X)), f.sigma2) <= 1e-10


@given(problems, st.floats(1e-3, 100.0))
def test_ridge_sse_at_least_ols(problem, lam):
    X, y, _ = problem
    ss = lin(X, y)
    ols = fit_linear(ss)
    ridge = fit_ridge(ss, lam)
    rss_ols = ols.sigma2 * ss.n
    assert ridge.score >= rss_ols * (1 - 1e-10) - 1e-10 * ss.s_yy


@given(problems)
def test_cov_symmetric_psd(problem):
    X, y, _ = problem
    for f in (fit_linear(lin(X, y)), fit_ridge(lin(X, y), 0.5)):
        assert np.array_equal(f.cov, f.cov.T)
        ev = np.linalg.eigvalsh(f.cov)
        assert ev.min() >= -1e-9 * max(ev.max(), 1e-300)
        assert f.sigma2 >= 0


@given(problems)
def test_boxcox_identity_power_matches_shifted_linear(problem):
    X, y, _ = problem
    y = np.exp(y / max(1.0, np.abs(y).max()))
    (entry,) = fit_boxcox_all(BoxCoxSS(X.shape[1], grid=[1.0]).update_batch(X, y))
    shifted = fit_linear(lin(X, y - 1.0))
    assert score_err(entry.profile_loglik, shifted.score) <= 1e-8
    assert rel_err(entry.fit.beta, shifted.beta) <= 1e-9
