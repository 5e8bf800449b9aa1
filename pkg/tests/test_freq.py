import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dataset_rows, random_id_dataset, random_truth, subject_conditional_loglik
from semicomp.data import ModelSpec, PreconditionError, SemiCompDataset, UnivariateDataset
from semicomp.freq import (
    FreqFit,
    IDLikelihood,
    fit_freq_id,
    fit_freq_univariate,
    loglik_weibull_id,
    loglik_weibull_univariate,
    numerical_hessian,
    predict_baseline,
)
from semicomp.simulate import WeibullIDTruth, simulate_univariate

NO_FRAILTY = ModelSpec(frailty=False)


def test_conditional_loglik_matches_hand_formula():
    ds = random_id_dataset(60, 1, p=(2, 0, 1))
    truth = random_truth(np.random.default_rng(2), p=(2, 0, 1))
    for spec in (ModelSpec(h3="Markov", frailty=False), NO_FRAILTY):
        want = sum(subject_conditional_loglik(r, truth, 1.0, spec.markov) for r in dataset_rows(ds))
        assert loglik_weibull_id(truth, ds, spec) == pytest.approx(want, rel=1e-12)


def test_frailty_limit_approaches_no_frailty():
    ds = random_id_dataset(10, 3)
    t = random_truth(np.random.default_rng(4))
    tiny = WeibullIDTruth(t.alpha, t.kappa, t.beta1, t.beta2, t.beta3, 1e-8)
    a = loglik_weibull_id(tiny, ds, ModelSpec(frailty=True))
    b = loglik_weibull_id(tiny, ds, NO_FRAILTY)
    assert abs(a - b) < 1e-6


def test_markov_identity_at_unit_shape():
    ds = random_id_dataset(80, 5)
    t = random_truth(np.random.default_rng(6))
    truth = WeibullIDTruth((t.alpha[0], t.alpha[1], 1.0), t.kappa, t.beta1, t.beta2, t.beta3, t.theta)
    for fr in (False, True):
        a = loglik_weibull_id(truth, ds, ModelSpec(h3="Markov", frailty=fr))
        b = loglik_weibull_id(truth, ds, ModelSpec(h3="semi-Markov", frailty=fr))
        assert abs(a - b) < 1e-12


def test_exponential_closed_form():
    ds = SemiCompDataset([1, 2], [1, 0], [2, 2], [1, 0])
    fixed = {"log_alpha1": 0.0, "log_alpha2": 0.0, "log_alpha3": 0.0, "log_kappa2": 0.0}
    fit = fit_freq_id(ds, ModelSpec(h3="Markov", frailty=False), fixed=fixed)
    assert fit.converged
    assert math.exp(fit["log_kappa1"]) == pytest.approx(1 / 3, rel=1e-8)
    # transition 3: one event over one unit of exposure
    assert math.exp(fit["log_kappa3"]) == pytest.approx(1.0, rel=1e-8)
    assert fit.fixed == fixed


def test_univariate_exponential_closed_form():
    d = UnivariateDataset([1.0, 2.0, 4.0], [1, 0, 1])
    fit = fit_freq_univariate(d, fixed={"log_alpha": 0.0})
    assert math.exp(fit["log_kappa"]) == pytest.approx(2 / 7, rel=1e-8)


def test_no_events_is_a_precondition_error():
    ds = SemiCompDataset([1, 2], [0, 0], [1, 2], [0, 0])
    with pytest.raises(PreconditionError, match="no observed events"):
        fit_freq_id(ds, NO_FRAILTY)
    with pytest.raises(PreconditionError):
        fit_freq_univariate(UnivariateDataset([1.0, 2.0], [0, 0]))


def test_invalid_dataset_rejected():
    with pytest.raises(PreconditionError):
        fit_freq_id(SemiCompDataset([3], [1], [2], [0]), NO_FRAILTY)


def test_unknown_fixed_parameter():
    ds = random_id_dataset(100, 7)
    with pytest.raises(ValueError, match="unknown parameter"):
        fit_freq_id(ds, NO_FRAILTY, fixed={"log_gamma": 0.0})


def test_fit_is_a_local_maximum_with_small_gradient():
    ds = random_id_dataset(400, 8, p=(1, 1, 1))
    spec = ModelSpec(frailty=True)
    fit = fit_freq_id(ds, spec)
    assert fit.converged and fit.gradient_norm < 1e-8
    lik = IDLikelihood(ds, spec)
    assert np.max(np.abs(lik.gradient(fit.estimates))) < 1e-8
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert lik.loglik(fit.estimates + rng.normal(0, 1e-3, lik.dim)) <= fit.loglik
    # covariance is the inverse observed information
    assert fit.covariance_available
    np.linalg.cholesky(fit.covariance)
    assert np.all(fit.std_errors() > 0)


def test_iteration_cap_reports_non_convergence():
    ds = random_id_dataset(300, 9)
    fit = fit_freq_id(ds, ModelSpec(frailty=True), max_iter=1)
    assert not fit.converged
    assert fit.gradient_norm >= 1e-8


def test_univariate_simulate_then_fit():
    n = 2000
    x = np.random.default_rng(10).normal(size=(n, 2))
    d = simulate_univariate(x, 1.3, 0.1, [-0.3, 0.8], (2, 6), 11, names=("a", "b"))
    fit = fit_freq_univariate(d)
    assert fit.converged
    assert abs(fit["beta[a]"] + 0.3) < 0.1 and abs(fit["beta[b]"] - 0.8) < 0.1


def test_univariate_loglik_hand_formula():
    d = UnivariateDataset([0.5, 2.0], [1, 0], x=[[1.0], [0.0]])
    a, k, b = 1.5, 0.4, 0.2
    want = (math.log(a * k * math.exp(b) * 0.5 ** (a - 1)) - k * math.exp(b) * 0.5 ** a) - k * 2.0 ** a
    assert loglik_weibull_univariate(a, k, [b], d) == pytest.approx(want, rel=1e-14)


def test_numerical_hessian_of_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    H = numerical_hessian(lambda x: -A @ x, np.array([0.3, -0.7]))
    np.testing.assert_allclose(H, -A, atol=1e-9)


def test_fit_json_round_trip():
    fit = fit_freq_id(random_id_dataset(150, 12), ModelSpec(frailty=True))
    back = FreqFit.from_dict(json.loads(fit.to_json()))
    np.testing.assert_array_equal(back.estimates, fit.estimates)
    np.testing.assert_array_equal(back.covariance, fit.covariance)
    assert back.names == fit.names and back.converged == fit.converged


def _manual_fit(alpha, kappa, cov=None):
    names = [f"log_{p}{g}" for g in (1, 2, 3) for p in ("kappa", "alpha")]
    est = np.array([math.log(kappa), math.log(alpha)] * 3)
    return FreqFit(names, est, cov, 0.0, True, 1, 0.0)


class TestPrediction:
    def test_constant_hazard(self):
        curves = predict_baseline(_manual_fit(1.0, 0.5), [0.0, 1.0, 3.0])
        for c in curves:
            if c.kind == "Haz":
                np.testing.assert_allclose(c.point, 0.5, rtol=1e-15)
            else:
                np.testing.assert_allclose(c.point, np.exp(-0.5 * c.times), rtol=1e-15)

    def test_survival_is_one_at_zero_and_bands_cover_point(self):
        fit = fit_freq_id(random_id_dataset(300, 13), ModelSpec(frailty=True))
        curves = predict_baseline(fit, np.linspace(0, 5, 11))
        assert len(curves) == 6
        for c in curves:
            assert c.has_intervals
            assert np.all(c.lower <= c.point) and np.all(c.point <= c.upper)
            if c.kind == "Surv":
                assert c.point[0] == 1.0 and c.lower[0] == 1.0

    def test_covariate_row(self):
        fit = _manual_fit(1.0, 0.5)
        fit.names += ["beta1[x]"]
        fit.estimates = np.append(fit.estimates, math.log(2.0))
        c = predict_baseline(fit, [1.0], x_new={"1": [1.0]})
        haz1 = [k for k in c if k.transition == 1 and k.kind == "Haz"][0]
        assert haz1.point[0] == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("grid", [[1.0, 0.5], [-1.0, 1.0], [[1.0]]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError, match="tgrid"):
            predict_baseline(_manual_fit(1.0, 1.0), grid)

    def test_needs_converged_fit(self):
        fit = _manual_fit(1.0, 1.0)
        fit.converged = False
        with pytest.raises(ValueError, match="converged"):
            predict_baseline(fit, [1.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.booleans(), st.booleans())
def test_gradient_matches_central_differences(seed, markov, frailty):
    ds = random_id_dataset(40, seed, p=(1, 0, 1))
    lik = IDLikelihood(ds, ModelSpec(h3="Markov" if markov else "semi-Markov", frailty=frailty))
    x = np.random.default_rng(seed).normal(0, 0.3, lik.dim)
    x[[0, 2, 4]] += math.log(0.2)
    g = lik.gradient(x)
    h = 1e-6
    for j in range(lik.dim):
        e = np.zeros(lik.dim)
        e[j] = h
        fd = (lik.loglik(x + e) - lik.loglik(x - e)) / (2 * h)
        assert abs(fd - g[j]) <= 1e-5 * max(1.0, abs(g[j]))
