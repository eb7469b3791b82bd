import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pmmfp.errors import TooFewObservations, UnstableBasis, ZeroResidual
from pmmfp.formb import (
    CustomBasisFn,
    Parity,
    ScoreBasisFn,
    _quadratic_g,
    correlant_report,
    default_basis,
    kunchenko_b2,
    schur_monotonicity_check,
    standardise,
)
from pmmfp.laws import ErrorLaw
from pmmfp.moments import sample_cumulants
from pmmfp.streams import stream


def test_default_basis_composition():
    a, b = default_basis("a"), default_basis("b")
    assert len(a) == 9 and len(b) == 15
    assert not any(fn.parity is Parity.ODD and fn.power == 0 for fn in a + b)
    assert set(a) <= set(b)
    assert kunchenko_b2() == [ScoreBasisFn(1, Parity.ODD), ScoreBasisFn(2, Parity.EVEN)]


def test_basis_evaluation():
    xi = np.array([-4.0, 0.25, 9.0])
    assert_allclose(ScoreBasisFn(0.5, "even")(xi), [2, 0.5, 3])
    assert_allclose(ScoreBasisFn(0.5, "odd")(xi), [-2, 0.5, 3])
    assert_allclose(ScoreBasisFn(0, "log")(xi), np.log(np.abs(xi)))
    with pytest.raises(ValueError):
        ScoreBasisFn(0, Parity.ODD)


@pytest.mark.parametrize("fn", default_basis("b"))
def test_analytic_derivatives(fn):
    xi = np.array([-2.3, -0.7, 0.4, 1.9])
    h = 1e-6
    numeric = (fn(xi + h) - fn(xi - h)) / (2 * h)
    assert_allclose(fn.derivative(xi), numeric, rtol=1e-5)


def test_custom_basis_uses_numeric_derivative():
    fn = CustomBasisFn(np.tanh, "tanh")
    xi = np.linspace(-2, 2, 9)
    assert_allclose(fn.derivative(xi), 1 - np.tanh(xi) ** 2, rtol=1e-7)
    e = stream(1, 1).standard_normal(500)
    rep = correlant_report(e, [ScoreBasisFn(1, "odd"), fn])
    assert rep.stable and 0 < rep.g_hat <= 1 + 1e-9


def test_b2_matches_closed_form_on_skewed_sample():
    e = ErrorLaw.parse("gamma(3)").sample(stream(2, 2), 5000)
    exact = correlant_report(e, kunchenko_b2(), tau=0.0)
    assert exact.g_hat == pytest.approx(sample_cumulants(e).g2, abs=1e-9)
    assert_allclose(exact.b, [-1.0, 0.0], atol=1e-12)
    # the default Tikhonov level shifts the value only slightly
    assert correlant_report(e, kunchenko_b2()).g_hat == pytest.approx(exact.g_hat, abs=1e-6)


def test_gaussian_b2_near_one():
    e = stream(3, 3).standard_normal(200_000)
    assert correlant_report(e, kunchenko_b2()).g_hat == pytest.approx(1.0, abs=0.01)


def test_sign_of_b_is_irrelevant():
    e = ErrorLaw.parse("exponential").sample(stream(4, 4), 2000)
    rep = correlant_report(e, default_basis("a"))
    assert _quadratic_g(rep.F, -rep.b, rep.tau_used) == pytest.approx(rep.g_hat, rel=1e-12)


def test_correlant_is_symmetric_psd():
    e = ErrorLaw.parse("beta(2,5)").sample(stream(5, 5), 3000)
    rep = correlant_report(e, default_basis("a"))
    assert_allclose(rep.F, rep.F.T)
    assert np.linalg.eigvalsh(rep.F).min() > -1e-10 * np.trace(rep.F)


def test_track_b_unstable_on_left_skew():
    e = ErrorLaw("negmix").sample(stream(6, 6), 686)
    a = correlant_report(e, default_basis("a"))
    b = correlant_report(e, default_basis("b"))
    assert not b.stable
    assert b.spectral.condition_number > 100 * a.spectral.condition_number
    assert b.bd0 is not None and a.bd0 is None


def test_zero_residual_with_negative_power():
    v = stream(7, 7).standard_normal(50)
    e = np.concatenate([v, -v, [0.0]])  # exact zero mean, so the last point stays 0
    with pytest.raises(ZeroResidual):
        correlant_report(e, [ScoreBasisFn(1, "odd"), ScoreBasisFn(-1, "odd")])
    rep = correlant_report(e, kunchenko_b2())
    assert rep.stable


def test_needs_five_per_function():
    with pytest.raises(TooFewObservations):
        correlant_report(stream(1, 8).standard_normal(40), default_basis("a"))


def test_stable_flag_tracks_tau_sensitivity():
    e = ErrorLaw("negmix").sample(stream(9, 9), 686)
    rep = correlant_report(e, default_basis("b"))
    ratio = rep.g_hat / rep.g_hat_tau_over_10
    assert (0.9 <= ratio <= 1.1 and rep.spectral.condition_number <= 1e8) == rep.stable


def test_bd0_fails_for_gaussian():
    hits = 0
    for r in range(200):
        xi = standardise(stream(10, r).standard_normal(686))
        rep = correlant_report(xi, default_basis("b"))
        hits += not rep.bd0.admissible
    assert hits / 200 >= 0.95


def test_schur_nested_non_increasing():
    e = ErrorLaw.parse("gamma(3)").sample(stream(11, 11), 100_000)
    b2 = kunchenko_b2()
    chk = schur_monotonicity_check(e, [b2, b2 + [ScoreBasisFn(3, "even")]])
    assert chk.passed and chk.g_values[1] <= chk.g_values[0] + 1e-6
    same = schur_monotonicity_check(e, [b2, b2])
    assert same.g_values[0] == same.g_values[1]


def test_schur_gaussian_both_near_one():
    e = stream(12, 12).standard_normal(100_000)
    b2 = kunchenko_b2()
    chk = schur_monotonicity_check(e, [b2, b2 + [ScoreBasisFn(3, "odd")]])
    assert chk.passed
    assert_allclose(chk.g_values, 1.0, atol=0.02)


def test_schur_requires_nesting_and_stability():
    e = ErrorLaw("negmix").sample(stream(13, 13), 686)
    with pytest.raises(ValueError):
        schur_monotonicity_check(e, [default_basis("a"), kunchenko_b2()])
    with pytest.raises(UnstableBasis):
        schur_monotonicity_check(e, [kunchenko_b2(), default_basis("b")])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["gamma(3)", "beta(2,5)", "lognormal(0.5)",
                                                "exponential", "gaussian"]))
def test_b2_equivalence_property(seed, law):
    e = ErrorLaw.parse(law).sample(stream(seed, 14), 200)
    g = correlant_report(e, kunchenko_b2(), tau=0.0).g_hat
    assert g == pytest.approx(sample_cumulants(e).g2, abs=1e-9)
