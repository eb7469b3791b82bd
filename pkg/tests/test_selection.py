import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pmmfp.basis import EnumerationMode, FpBlock, Track, build_design
from pmmfp.errors import InsufficientCandidates, NonPositiveCovariate, PerfectFit
from pmmfp.estimators import Estimator, fit_ols
from pmmfp.selection import (
    Candidate,
    SelectionResult,
    SingleBestRule,
    akaike_weights,
    bic,
    coefficient_estimand,
    fma,
    prediction_estimand,
    report_single_best_rule,
    sweep,
)
from pmmfp.streams import stream


def data(seed, n=200, noise=1.0):
    rng = stream(seed, 30)
    x = rng.uniform(0.5, 5, n)
    y = 1 + 2 * np.sqrt(x) + noise * rng.standard_normal(n)
    return x, y


def fake_fit(rss, n, k):
    x = np.linspace(1, 2, n)
    f = fit_ols(build_design(x, FpBlock.parse("{1}")), x + np.sin(7 * x))
    return replace(f, rss=float(rss), beta=np.zeros(k))


def test_bic_examples():
    assert bic(fake_fit(100, 100, 2)) == pytest.approx(2 * math.log(100))
    assert bic(fake_fit(100 * math.e, 100, 2)) == pytest.approx(100 + 2 * math.log(100))
    assert bic(fake_fit(5, 100, 4)) - bic(fake_fit(5, 100, 2)) == pytest.approx(2 * math.log(100))
    with pytest.raises(PerfectFit):
        bic(fake_fit(0.0, 100, 2))


def test_sweep_track_a_has_thirty_candidates():
    x, y = data(1)
    sel = sweep(x, y)
    assert len(sel.candidates) + len(sel.failures) == 30
    assert sorted(sel.ranking) == list(range(len(sel.candidates)))
    bics = [sel.candidates[i].bic for i in sel.ranking]
    assert bics == sorted(bics)
    assert sel.delta_bic_runner_up >= 0


def test_candidate_list_is_estimator_independent():
    x, y = data(2)
    a = sweep(x, y, estimator=Estimator.OLS)
    b = sweep(x, y, estimator=Estimator.PMM)
    assert [c.block for c in a.candidates] == [c.block for c in b.candidates]


def test_bic_consistency_for_sqrt_signal():
    hits = 0
    for seed in range(20):
        x, y = data(100 + seed, n=500, noise=0.5)
        sel = sweep(x, y, estimator="ols")
        hits += 0.5 in sel.candidates[sel.best].block.powers
    assert hits / 20 >= 0.9


def test_sweep_with_covariates_and_threads():
    x, y = data(3)
    z = stream(3, 31).standard_normal(x.size)
    sel1 = sweep(x, y + 0.5 * z, z, threads=1)
    sel4 = sweep(x, y + 0.5 * z, z, threads=4)
    assert sel1.ranking == sel4.ranking
    assert sel1.best_fit.column_labels[-1] == "z1"


def test_sweep_shift_handling():
    x, y = data(4)
    with pytest.raises(NonPositiveCovariate):
        sweep(x - 3, y)
    sel = sweep(x - 3, y, offset="auto")
    assert sel.best_fit.applied_offset > 0


def test_full_track_ra_sweep_runs():
    x, y = data(5)
    sel = sweep(x, y, track=Track.FULL, mode=EnumerationMode.RA_DEG2, estimator="ols")
    assert len(sel.candidates) + len(sel.failures) == 44


def _selection(bics, thetas, variances):
    x, y = data(6, n=40)
    cands = []
    for i, b in enumerate(bics):
        f = fit_ols(build_design(x, FpBlock.parse("{1}")), y)
        f = replace(f, beta=np.array([thetas[i], variances[i]]))
        cands.append(Candidate(FpBlock.parse(["{1}", "{2}", "{3}", "{0.5}", "{0}"][i]), f, b))
    order = tuple(int(i) for i in np.argsort(bics, kind="stable"))
    return SelectionResult(tuple(cands), order, order[0], bics[order[1]] - bics[order[0]]
                           if len(bics) > 1 else math.inf, 40, Estimator.OLS)


def est(f):
    return float(f.beta[0]), float(f.beta[1])


def test_fma_two_candidate_arithmetic():
    res = fma(_selection([0.0, 2.0], [1.0, 0.0], [0.0, 0.0]), est, 2)
    assert_allclose(res.weights, [0.7311, 0.2689], atol=1e-4)
    assert res.theta_fma == pytest.approx(0.7311, abs=1e-4)
    assert res.var_fma == pytest.approx(0.1966, abs=1e-4)
    assert res.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_fma_single_and_uniform():
    sel = _selection([3.0, 1.0, 2.0], [1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
    one = fma(sel, est, 1)
    assert one.theta_fma == 2.0 and one.var_fma == pytest.approx(0.2)
    eq = fma(_selection([5.0, 5.0, 5.0], [1.0, 2.0, 3.0], [0, 0, 0]), est, 3)
    assert_allclose(eq.weights, 1 / 3)
    with pytest.raises(InsufficientCandidates):
        fma(sel, est, 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=5), st.floats(-1e3, 1e3))
def test_weights_shift_invariant(bics, c):
    w1 = akaike_weights(bics)
    w2 = akaike_weights(np.array(bics) + c)
    assert_allclose(w1, w2, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=2, max_size=5),
       st.lists(st.floats(-5, 5), min_size=5, max_size=5),
       st.lists(st.floats(0, 2), min_size=5, max_size=5))
def test_fma_variance_bounds(bics, thetas, variances):
    k = len(bics)
    res = fma(_selection(bics, thetas[:k], variances[:k]), est, k)
    between = res.weights * (res.thetas - res.theta_fma) ** 2
    assert res.var_fma >= float(res.weights @ res.variances) - 1e-12
    assert res.var_fma >= between.max() - 1e-12


def test_argmin_invariant_to_rescaling_y():
    for seed in range(5):
        x, y = data(200 + seed)
        a = sweep(x, y, estimator="ols")
        b = sweep(x, 2 * y, estimator="ols")
        assert a.candidates[a.best].block == b.candidates[b.best].block


def test_fma_top1_equals_single_best_prediction():
    x, y = data(7)
    sel = sweep(x, y)
    e = prediction_estimand(2.0)
    assert fma(sel, e, 1).theta_fma == e(sel.best_fit)[0]


def test_coefficient_fma_refused_across_blocks():
    x, y = data(8)
    sel = sweep(x, y)
    with pytest.raises(ValueError):
        fma(sel, coefficient_estimand("intercept"), 3)


def test_single_best_rule():
    def rule(d):
        sel = _selection([0.0, d], [0, 0], [0, 0])
        return report_single_best_rule(sel)
    assert rule(7.0) is SingleBestRule.SINGLE_BEST_OK
    assert rule(0.007) is SingleBestRule.RECOMMEND_FMA
    assert rule(6.0) is SingleBestRule.RECOMMEND_FMA


def test_perfect_fit_ranked_first():
    x = np.linspace(1, 5, 40)
    sel = sweep(x, 1 + 2 * x, estimator="ols")
    best = sel.candidates[sel.best]
    assert best.perfect_fit and best.bic == -math.inf
    assert sel.to_dict()["candidates"][0]["perfect_fit"]
