import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semicomp.diagnostics import bayes_baseline_curves, psrf, summarize_posterior
from semicomp.samples import PosteriorSamples


def samples_from(chains, **meta):
    return PosteriorSamples([{k: np.asarray(v, dtype=float) for k, v in c.items()} for c in chains], meta)


class TestPSRF:
    def test_identical_chains(self):
        x = np.array([0.3, 1.7, -0.2, 2.5, 0.9])
        assert psrf([x, x]) == pytest.approx(math.sqrt(4 / 5), abs=1e-15)

    def test_hand_value(self):
        # W = 1, B = 3 * 0.5, V = 2/3 + 1.5/3 = 7/6
        assert psrf([[1, 2, 3], [2, 3, 4]]) == pytest.approx(math.sqrt(7 / 6), rel=1e-14)

    def test_constant_chains(self):
        assert psrf([[2.0, 2.0], [2.0, 2.0]]) == 1.0
        assert psrf([[1.0, 1.0], [2.0, 2.0]]) == math.inf

    @pytest.mark.parametrize("x", [[[1, 2, 3]], [[1], [2]], [1, 2, 3]])
    def test_needs_two_chains_of_two(self, x):
        with pytest.raises(ValueError):
            psrf(x)

    def test_separated_chains_flagged(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 2000)) + np.array([[0.0], [3.0], [6.0]])
        assert psrf(x) > 2


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(2, 40), st.integers(0, 2**31), st.floats(-100, 100), st.floats(0.1, 100))
def test_psrf_is_affine_invariant(m, n, seed, shift, scale):
    x = np.random.default_rng(seed).normal(size=(m, n))
    assert psrf(shift + scale * x) == pytest.approx(psrf(x), rel=1e-9)


class TestSummary:
    def test_median_and_linear_quantiles(self):
        s = samples_from([{"alpha1": np.arange(1, 51)}, {"alpha1": np.arange(51, 101)}])
        r = summarize_posterior(s)["alpha1"]
        assert r.point == 50.5
        assert (r.lower, r.upper) == pytest.approx((3.475, 97.525), abs=1e-12)
        assert r.psrf is not None and r.exp_point is None

    def test_coefficients_get_exponentiated_rows(self):
        s = samples_from([{"beta1[x]": [-1.0, 0.0, 1.0]}, {"beta1[x]": [-1.0, 0.0, 1.0]}])
        r = summarize_posterior(s, level=0.5)["beta1[x]"]
        assert r.exp_point == 1.0
        assert r.exp_lower == pytest.approx(math.exp(r.lower)) and r.exp_upper == pytest.approx(math.exp(r.upper))

    def test_constant_draws(self):
        s = samples_from([{"theta": [0.7] * 5}, {"theta": [0.7] * 5}])
        r = summarize_posterior(s)["theta"]
        assert (r.point, r.lower, r.upper, r.psrf) == (0.7, 0.7, 0.7, 1.0)

    def test_single_chain_warns_and_omits_psrf(self):
        s = samples_from([{"theta": [1.0, 2.0, 3.0]}])
        with pytest.warns(UserWarning, match="2 chains"):
            t = summarize_posterior(s)
        assert not t.has_psrf and t["theta"].psrf is None
        assert "PSRF" not in t.to_text()
        assert t.to_csv().splitlines()[1].split(",")[4] == ""

    def test_variable_dimension_columns_are_left_out(self):
        s = samples_from([{"K1": [0, 1], "s1[1]": [1, 2], "lambda1[1]": [0, 0], "gamma[1]": [1, 1], "theta": [1, 2]}] * 2)
        assert [r.name for r in summarize_posterior(s).rows] == ["K1", "theta"]

    def test_needs_draws(self):
        with pytest.raises(ValueError):
            summarize_posterior(samples_from([{"theta": [1.0]}]))
        with pytest.raises(ValueError):
            summarize_posterior(PosteriorSamples([]))

    def test_text_layout(self):
        s = samples_from([{"theta": [1.0, 2.0]}, {"theta": [1.5, 2.5]}])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            text = summarize_posterior(s, level=0.9).to_text()
        assert "5%" in text and "95%" in text and "PSRF" in text
        assert text.startswith("2 chain(s), 2 retained draws each")


def _weibull_samples(alpha, kappa, n=4):
    cols = {}
    for g in (1, 2, 3):
        cols[f"alpha{g}"] = np.full(n, alpha)
        cols[f"kappa{g}"] = np.full(n, kappa)
    return samples_from([cols])


class TestCurves:
    def test_unit_shape_is_constant_hazard(self):
        t = np.array([0.0, 0.5, 2.0])
        for c in bayes_baseline_curves(_weibull_samples(1.0, 0.5), t, kind="Haz"):
            np.testing.assert_allclose(c.point, 0.5, rtol=1e-15)
        for c in bayes_baseline_curves(_weibull_samples(1.0, 0.5), t, kind="Surv"):
            np.testing.assert_allclose(c.point, np.exp(-0.5 * t), rtol=1e-15)
            assert c.point[0] == 1.0

    def test_single_interval_pem(self):
        cols = {}
        for g in (1, 2, 3):
            cols.update({f"K{g}": [0, 0], f"s{g}[1]": [5.0, 5.0], f"lambda{g}[1]": [math.log(2)] * 2,
                         f"s{g}[2]": [math.nan] * 2, f"lambda{g}[2]": [math.nan] * 2})
        s = samples_from([cols], sg_max=[5.0] * 3)
        t = np.linspace(0, 5, 6)
        for c in bayes_baseline_curves(s, t):
            np.testing.assert_allclose(c.point, np.exp(-2 * t), rtol=1e-14)
        for c in bayes_baseline_curves(s, t, kind="Haz"):
            np.testing.assert_allclose(c.point, 2.0, rtol=1e-14)
        with pytest.raises(ValueError, match="sg_max"):
            bayes_baseline_curves(s, [1.0, 6.0])

    def test_surv_is_exp_of_minus_integrated_hazard(self):
        cols = {}
        for g in (1, 2, 3):
            cols.update({f"K{g}": [1], f"s{g}[1]": [1.0], f"s{g}[2]": [3.0],
                         f"lambda{g}[1]": [0.2], f"lambda{g}[2]": [-0.5]})
        s = samples_from([cols], sg_max=[3.0] * 3)
        t = np.linspace(0, 3, 301)
        haz = bayes_baseline_curves(s, t, kind="Haz")[0].point
        surv = bayes_baseline_curves(s, t)[0].point
        cum = np.concatenate([[0.0], np.cumsum(np.diff(t) * haz[1:])])
        np.testing.assert_allclose(surv, np.exp(-cum), rtol=1e-8)

    def test_median_survival_is_non_increasing(self):
        rng = np.random.default_rng(3)
        cols = {}
        for g in (1, 2, 3):
            cols[f"alpha{g}"] = rng.uniform(0.5, 2, 200)
            cols[f"kappa{g}"] = rng.uniform(0.1, 1, 200)
        for c in bayes_baseline_curves(samples_from([cols]), np.linspace(0, 4, 41)):
            assert np.all(np.diff(c.point) <= 0)
            assert np.all(c.lower <= c.point) and np.all(c.point <= c.upper)

    @pytest.mark.parametrize("kind, grid, msg", [("Cum", [1.0], "kind"), ("Surv", [2.0, 1.0], "tgrid"),
                                                 ("Surv", [-1.0], "tgrid")])
    def test_bad_arguments(self, kind, grid, msg):
        with pytest.raises(ValueError, match=msg):
            bayes_baseline_curves(_weibull_samples(1.0, 1.0), grid, kind=kind)

    def test_foreign_samples(self):
        with pytest.raises(ValueError, match="Weibull or PEM"):
            bayes_baseline_curves(samples_from([{"mu1": [0.0, 1.0]}]), [1.0])
