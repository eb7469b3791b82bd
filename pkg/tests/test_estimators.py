import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pmmfp.basis import FpBlock, build_design
from pmmfp.errors import NonPositiveInput
from pmmfp.estimators import (
    Estimator,
    SolverConfig,
    fit_huber,
    fit_ols,
    fit_pmm2,
    pmm2_score,
    predict_mean,
    psi2,
)
from pmmfp.laws import ErrorLaw
from pmmfp.streams import stream


def skewed_data(seed, n=300, block="{0.5}", law="gamma(3)"):
    rng = stream(seed, 4)
    x = rng.uniform(0.5, 5, n)
    D = build_design(x, FpBlock.parse(block))
    y = D.values @ np.arange(1.0, D.k + 1) + ErrorLaw.parse(law).sample(rng, n)
    return D, y


def test_solver_config_validation():
    for bad in (dict(tol=0), dict(max_iter=0), dict(max_iter=1001), dict(min_damping=2),
                dict(initial_damping=0.01, min_damping=0.1), dict(ridge=-1), dict(se_kind="x")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_ols_intercept_only():
    f = fit_ols(np.ones((2, 1)), np.array([1.0, 3.0]))
    assert_allclose(f.beta, [2.0])
    assert f.rss == pytest.approx(2.0)
    assert f.converged and f.iterations == 0
    assert f.cumulants.degenerate


def test_ols_perfect_fit_is_degenerate():
    x = np.linspace(1, 5, 20)
    D = build_design(x, FpBlock.parse("{1}"))
    f = fit_ols(D, 3 + 2 * x)
    assert np.abs(f.residuals).max() < 1e-10
    assert f.cumulants.degenerate
    assert "degenerate_cumulants" in f.flags


def test_ols_matches_normal_equations():
    rng = stream(8, 8)
    X = np.column_stack([np.ones(200), rng.standard_normal((200, 2))])
    y = rng.standard_normal(200)
    f = fit_ols(X, y)
    assert_allclose(f.beta, np.linalg.solve(X.T @ X, X.T @ y), rtol=1e-8)
    assert f.rss == pytest.approx(float(f.residuals @ f.residuals), rel=1e-9)


def test_psi2_at_one():
    for a in (-3.0, 0.0, 0.7):
        assert psi2(1.0, a) == 1.0
        assert psi2(-1.0, a) == -1.0


def test_newton_matrix_matches_finite_difference():
    D, y = skewed_data(1, n=60, block="{0.5,2}")
    ols = fit_ols(D, y)
    sigma, a = math.sqrt(ols.cumulants.sigma2), ols.cumulants.a
    beta = ols.beta + 0.01
    U, H, _ = pmm2_score(D.values, y, beta, sigma, a)
    J = np.empty_like(H)
    h = 1e-6
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        Up, _, _ = pmm2_score(D.values, y, beta + e, sigma, a)
        Um, _, _ = pmm2_score(D.values, y, beta - e, sigma, a)
        J[:, j] = -(Up - Um) / (2 * h)
    assert_allclose(H, J, rtol=1e-4, atol=1e-6 * np.abs(H).max())


def test_pmm_converges_and_scores_zero():
    D, y = skewed_data(2)
    f = fit_pmm2(D, y)
    assert f.converged and f.iterations <= 50
    sigma = math.sqrt(f.cumulants.sigma2)
    score = D.values.T @ psi2(f.residuals / sigma, f.cumulants.a)
    assert np.abs(score).max() <= 1e-6 * D.n


def test_pmm_se_ratio_is_sqrt_g2():
    D, y = skewed_data(3)
    p, o = fit_pmm2(D, y), fit_ols(D, y)
    assert_allclose(p.se_asymptotic / o.se_asymptotic, math.sqrt(p.g2), rtol=1e-9)


def test_pmm_gains_on_skewed_errors():
    D, y = skewed_data(4, n=500, law="exponential(1)")
    p = fit_pmm2(D, y)
    assert p.g2 < 0.8
    assert p.cumulants.a > 0


def symmetrised(seed, n=100):
    # OLS residuals of the second half mirror the first, so their skewness is exactly zero
    rng = stream(seed, 5)
    half = rng.uniform(0.5, 5, n // 2)
    x = np.concatenate([half, half])
    D = build_design(x, FpBlock.parse("{0.5}"))
    e = rng.standard_gamma(2.0, n // 2)
    y = D.values @ np.array([1.0, 2.0]) + np.concatenate([e, -e])
    return D, y


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_symmetric_residuals_revert_to_ols(seed):
    D, y = symmetrised(seed)
    o, p = fit_ols(D, y), fit_pmm2(D, y)
    assert abs(o.cumulants.gamma3) < 1e-12
    assert_allclose(p.beta, o.beta, rtol=0, atol=1e-10)
    assert p.iterations <= 1


def test_reestimated_cumulants_option():
    D, y = skewed_data(5)
    f = fit_pmm2(D, y, SolverConfig(reestimate_cumulants=True))
    g = fit_pmm2(D, y)
    assert f.converged
    assert_allclose(f.beta, g.beta, atol=0.2)


def test_sandwich_se_is_close_to_model_se():
    D, y = skewed_data(6, n=2000)
    m = fit_pmm2(D, y)
    s = fit_pmm2(D, y, SolverConfig(se_kind="sandwich"))
    assert_allclose(s.se_asymptotic, m.se_asymptotic, rtol=0.25)


def test_huber_close_to_ols_under_normality():
    D, y = skewed_data(7, n=3000, law="gaussian")
    h, o = fit_huber(D, y), fit_ols(D, y)
    assert h.converged
    assert np.all(np.abs(h.beta - o.beta) <= 2 * o.se_asymptotic)


def test_huber_resists_outlier():
    D, y = skewed_data(8, n=100, law="gaussian")
    clean = fit_ols(D, y).beta
    yc = y.copy()
    yc[np.argmax(D.values[:, 1])] += 200
    dirty = fit_ols(D, yc).beta
    robust = fit_huber(D, yc).beta
    assert np.linalg.norm(robust - clean) < np.linalg.norm(dirty - clean)


def test_predict_mean_examples():
    D, y = skewed_data(9, block="{0.5}")
    f = fit_ols(D, y)
    from dataclasses import replace

    assert predict_mean(replace(f, beta=np.array([1.0, 2.0])), 4.0) == pytest.approx(5.0)
    D0, y0 = skewed_data(9, block="{0}")
    f0 = replace(fit_ols(D0, y0), beta=np.array([0.0, 1.0]))
    assert predict_mean(f0, math.e) == pytest.approx(1.0)
    D2, y2 = skewed_data(9, block="{1,2}")
    f2 = replace(fit_ols(D2, y2), beta=np.array([1.0, 1.0, 1.0]))
    assert predict_mean(f2, 2.0) == pytest.approx(7.0)
    with pytest.raises(NonPositiveInput):
        predict_mean(f, -1.0)


def test_estimator_parse():
    assert Estimator.parse("PMM-FP") is Estimator.PMM
    assert Estimator.parse("ols") is Estimator.OLS
    with pytest.raises(ValueError):
        Estimator.parse("mle")


@pytest.mark.slow
def test_gamma_efficiency_band():
    o, p = [], []
    for r in range(300):
        D, y = skewed_data(1000 + r, n=500, law="gamma(3)")
        o.append(fit_ols(D, y).beta[1])
        p.append(fit_pmm2(D, y).beta[1])
    q = lambda v: np.subtract(*np.quantile(v, [0.75, 0.25]))
    ratio = (q(np.array(p)) / q(np.array(o))) ** 2
    assert 0.45 <= ratio <= 0.80
