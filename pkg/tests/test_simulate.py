import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from semicomp.data import validate
from semicomp.simulate import (
    WeibullIDTruth,
    assemble_outcomes,
    simulate_aft_id,
    simulate_id,
    simulate_univariate,
    weibull_inverse_cdf,
)

BIG = 1e6


def no_cov(n):
    return np.zeros((n, 0))


def test_outcome_assembly_worked_record():
    out = assemble_outcomes([0.3], [0.9], [0.5], [1.2])
    assert [float(v[0]) for v in out] == [0.3, 1, 0.8, 1]


@pytest.mark.parametrize("latent, record", [
    ((0.3, 0.9, 5.0, 1.2), (0.3, 1, 1.2, 0)),      # ill, censored before death
    ((0.9, 0.3, 0.1, 1.2), (0.3, 0, 0.3, 1)),      # death without illness
    ((1.5, 2.0, 0.1, 1.2), (1.2, 0, 1.2, 0)),      # censored for both
])
def test_outcome_categories(latent, record):
    out = assemble_outcomes(*([v] for v in latent))
    assert tuple(float(v[0]) for v in out) == record


def test_immediate_censoring():
    truth = WeibullIDTruth((1, 1, 1), (1, 1, 1), theta=0.5, cens=(0, 0))
    ds = simulate_id(no_cov(50), None, None, truth, 1)
    for f in ("time1", "event1", "time2", "event2"):
        assert np.all(getattr(ds, f) == 0)
    assert validate(ds) == []


def test_competing_exponentials_fraction():
    n = 100_000
    truth = WeibullIDTruth((1, 1, 1), (1, 1, 1), cens=(BIG, BIG))
    ds = simulate_id(no_cov(n), None, None, truth, 3)
    p = 0.5
    assert abs(ds.event1.mean() - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_frailty_marginal_of_first_event():
    n = 20_000
    truth = WeibullIDTruth((1.3, 1.3, 1.0), (0.2, 0.1, 0.5), theta=0.8, cens=(BIG, BIG))
    ds = simulate_id(no_cov(n), None, None, truth, 4)
    rate = 0.3
    # min(T1, T2) given gamma is Weibull(1.3, gamma * rate); Gamma frailty gives the Burr survival
    cdf = lambda t: 1 - (1 + 0.8 * rate * t ** 1.3) ** (-1 / 0.8)  # noqa: E731
    assert stats.kstest(ds.time1, cdf).statistic < 1.63 / math.sqrt(n)


def test_sojourn_follows_transition_three():
    n = 20_000
    truth = WeibullIDTruth((1.0, 1.0, 0.7), (1.0, 0.2, 0.4), cens=(BIG, BIG))
    ds = simulate_id(no_cov(n), None, None, truth, 5)
    soj = (ds.time2 - ds.time1)[ds.event1 == 1]
    assert stats.kstest(soj, stats.weibull_min(0.7, scale=0.4 ** (-1 / 0.7)).cdf).statistic < 1.63 / math.sqrt(len(soj))


def test_covariate_effect_shifts_rates():
    n = 40_000
    x = np.repeat([[0.0], [1.0]], n // 2, axis=0)
    truth = WeibullIDTruth((1, 1, 1), (1, 1, 1), beta1=(math.log(3),), cens=(BIG, BIG))
    ds = simulate_id(x, None, None, truth, 6)
    # P(illness first) = 3 / (3 + 1) when x = 1, 1/2 when x = 0
    top = ds.event1[n // 2:].mean()
    assert abs(top - 0.75) < 3 * math.sqrt(0.75 * 0.25 / (n // 2))


def test_determinism_and_seed_sensitivity():
    x = np.random.default_rng(0).normal(size=(200, 2))
    truth = WeibullIDTruth((1.1, 0.9, 1), (0.1, 0.1, 0.2), (0.3, -0.2), (0.1, 0.1), (0.5, 0.0), 0.4, cens=(1, 5))
    a = simulate_id(x, x, x, truth, 42)
    b = simulate_id(x, x, x, truth, 42)
    c = simulate_id(x, x, x, truth, 43)
    assert a.equals(b)
    assert not a.equals(c)


def test_clusters():
    n = 300
    cl = np.arange(n) % 10 + 1
    S = np.diag([0.5, 0.5, 0.5])
    truth = WeibullIDTruth((1, 1, 1), (0.2, 0.2, 0.2), SigmaV=S, cens=(1, 3))
    ds = simulate_id(no_cov(n), None, None, truth, 1, cluster_of=cl)
    np.testing.assert_array_equal(ds.cluster, cl)
    with pytest.raises(ValueError, match="together"):
        simulate_id(no_cov(n), None, None, truth, 1)


@pytest.mark.parametrize("kw, msg", [
    (dict(alpha=(1, 1), kappa=(1, 1, 1)), "alpha and kappa"),
    (dict(alpha=(1, 1, 1), kappa=(1, 0, 1)), "positive"),
    (dict(alpha=(1, 1, 1), kappa=(1, 1, 1), cens=(2, 1)), "cens"),
    (dict(alpha=(1, 1, 1), kappa=(1, 1, 1), theta=-1), "theta"),
    (dict(alpha=(1, 1, 1), kappa=(1, 1, 1), SigmaV=[[1, 2, 0], [2, 1, 0], [0, 0, 1]]), "positive definite"),
])
def test_truth_invariants(kw, msg):
    with pytest.raises(ValueError, match=msg):
        WeibullIDTruth(**kw)


def test_univariate_exponential_mean():
    n = 100_000
    d = simulate_univariate(None, 1.0, 1.0, [], (BIG, BIG), 7, cluster_of=np.ones(n, int))
    assert np.all(d.event == 1)
    assert abs(d.time.mean() - 1.0) < 3 / math.sqrt(n)


def test_univariate_immediate_censoring():
    d = simulate_univariate(no_cov(20), 1.0, 1.0, [], (0, 0), 7)
    assert np.all(d.event == 0) and np.all(d.time == 0)


def test_weibull_inverse_cdf():
    t = weibull_inverse_cdf(np.array([math.exp(-2.0)]), 2.0, 0.5)
    assert t[0] == pytest.approx(2.0, rel=1e-15)


def test_aft_illness_probability():
    n = 100_000
    mu, s2 = (0.0, 0.5, 0.0), (1.0, 1.0, 1.0)
    ds = simulate_aft_id(no_cov(n), None, None, ((), (), ()), mu, s2, 0.0, (BIG, BIG), 8)
    p = stats.norm.cdf(0.5 / math.sqrt(2.0))
    assert abs(ds.event1.mean() - p) < 3 * math.sqrt(p * (1 - p) / n)
    assert validate(ds) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_generated_records_always_validate(seed, theta, width):
    x = np.random.default_rng(seed).normal(size=(30, 1))
    truth = WeibullIDTruth((1.0, 1.2, 0.8), (0.3, 0.2, 0.4), (0.2,), (-0.1,), (0.3,), theta, cens=(0.5, 0.5 + width))
    ds = simulate_id(x, x, x, truth, seed)
    assert validate(ds) == []
    assert np.all(ds.time2 <= 0.5 + width)
