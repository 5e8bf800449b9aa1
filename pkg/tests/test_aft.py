import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from semicomp.aft import (
    AFTConfig,
    AFTHyper,
    AFTModel,
    AFTState,
    AFTTuning,
    init_start_values_aft,
    mcmc_aft,
    theta_full_conditional_aft,
)
from semicomp.data import IntervalDataset, PreconditionError, to_interval_representation
from semicomp.simulate import simulate_aft_id

INF = math.inf
# rows that guarantee finite starting information for every transition
ANCHORS = [(0.0, 1.0, 1.0, 3.0, 3.0), (0.0, 2.0, INF, 2.5, 2.5)]


def interval_data(rows, x=None):
    cols = [np.array(c, dtype=float) for c in zip(*rows)]
    kw = {}
    if x is not None:
        kw = dict(x1=x, x2=x, x3=x, names1=("x",), names2=("x",), names3=("x",))
    return IntervalDataset(*cols, **kw)


def fit(data, seed=1, n_chains=1, **cfg):
    cfg.setdefault("num_reps", 400)
    config = AFTConfig(n_chains=n_chains, seed=seed, **cfg)
    return mcmc_aft(data, AFTHyper(), init_start_values_aft(data, n_chains, seed), config)


def test_theta_conditional():
    assert theta_full_conditional_aft([1.0, -1.0], (0.5, 0.05)) == pytest.approx((1.5, 1.05), abs=1e-12)
    assert theta_full_conditional_aft([], (2.0, 3.0)) == (2.0, 3.0)


def test_degenerate_interval_pins_the_latent_time():
    data = interval_data(ANCHORS + [(0.0, 2.0, 2.0, 2.0, 7.0), (0.0, 0.5, 4.0, 6.0, INF)])
    s = fit(data, nY1_save=4, nY2_save=4, num_reps=600)
    assert np.all(s.pooled("y1[1]") == 1.0) and np.all(s.pooled("y2[1]") == 3.0)
    assert np.all(s.pooled("y1[3]") == 2.0)
    t2 = s.pooled("y2[3]")
    assert np.all((t2 > 2.0) & (t2 <= 7.0))
    t1, t2 = s.pooled("y1[4]"), s.pooled("y2[4]")
    assert np.all((t1 >= 0.5) & (t1 <= 4.0) & (t2 >= 6.0))


def test_terminal_time_bounds_the_non_terminal_time():
    b = 3.0
    data = interval_data(ANCHORS + [(0.0, 1.0, INF, b, b)] * 5)
    s = fit(data, nY1_save=7, nY2_save=7, num_reps=2000, debug=True)
    for i in range(3, 8):
        t1 = s.pooled(f"y1[{i}]")
        assert np.all(np.isnan(t1) | ((t1 >= 1.0) & (t1 < b)))
        assert np.all(s.pooled(f"y2[{i}]") == b)
    # both histories are visited
    t1 = np.concatenate([s.pooled(f"y1[{i}]") for i in range(3, 8)])
    assert 0 < np.isnan(t1).mean() < 1


def test_left_truncated_run_keeps_invariants():
    data = interval_data(ANCHORS + [(1.5, 2.0, 3.0, 4.0, INF), (0.7, 0.7, INF, 0.9, 2.0)])
    s = fit(data, num_reps=1500, debug=True, nY1_save=4, nY2_save=4)
    t1, t2 = s.pooled("y1[3]"), s.pooled("y2[3]")
    assert np.all((t1 >= 2.0) & (t1 <= 3.0) & (t2 >= 4.0))
    t2 = s.pooled("y2[4]")
    assert np.all((t2 >= 0.9) & (t2 <= 2.0))


def test_impossible_record_is_rejected():
    # the non-terminal event was observed after the terminal window closed
    data = interval_data(ANCHORS + [(0.0, 5.0, 5.0, 1.0, 5.0)])
    with pytest.raises(PreconditionError):
        AFTModel(data, AFTHyper(), AFTConfig(num_reps=1))


def test_start_needs_finite_information():
    data = interval_data([(0.0, 1.0, INF, 1.0, INF)])
    with pytest.raises(ValueError, match="transition 1"):
        init_start_values_aft(data, 1, 1)


@st.composite
def interval_rows(draw):
    lt = draw(st.sampled_from([0.0, 0.0, draw(st.floats(0.01, 2.0))]))
    a1 = lt + draw(st.floats(0.0, 3.0))
    b1 = draw(st.sampled_from([a1, a1 + draw(st.floats(0.01, 3.0)), INF]))
    a2 = lt + draw(st.floats(0.0, 4.0))
    b2 = draw(st.sampled_from([a2, a2 + draw(st.floats(0.01, 3.0)), INF]))
    return lt, a1, b1, a2, b2


def _feasible(r):
    lt, a1, b1, a2, b2 = r
    lo1, lo2 = max(a1, lt), max(a2, lt)
    valid = a1 > 0 or b1 > 0
    valid &= b1 > 0 and b2 > 0 and a1 <= b2 and (lt == 0 or b2 > lt)
    return valid and (lo1 < b2 or (math.isinf(b1) and max(lo2, a1) <= b2))


@settings(max_examples=100, deadline=None)
@given(st.lists(interval_rows(), min_size=1, max_size=12), st.integers(0, 2**31))
def test_starts_and_scans_respect_the_intervals(rows, seed):
    rows = [r for r in rows if _feasible(r)]
    assume(rows)
    data = interval_data(ANCHORS + rows)
    model = AFTModel(data, AFTHyper(), AFTConfig(num_reps=1))
    starts = init_start_values_aft(data, 2, seed)
    for s in starts:
        model.check_state(s)
    fit(data, seed=seed, num_reps=30, thin=1, burnin_perc=0.0, debug=True)


def test_retained_count_and_layout():
    data = interval_data(ANCHORS * 3)
    s = fit(data, n_chains=2, num_reps=1000, thin=10, burnin_perc=0.5, nGam_save=2)
    assert s.n_draws == 50
    assert s.names == ["mu1", "mu2", "mu3", "sigma2_1", "sigma2_2", "sigma2_3", "theta", "gamma[1]", "gamma[2]"]


def _simulated(n=60, seed=5):
    x = np.random.default_rng(seed).normal(size=(n, 1))
    rc = simulate_aft_id(x, x, x, [[0.3], [0.2], [-0.1]], (1.0, 1.3, 0.5), (0.5, 0.5, 0.5), 0.2, (3, 8), seed,
                         names=(("x",),) * 3)
    return to_interval_representation(rc)


def test_deterministic():
    data = _simulated()
    a = fit(data, seed=2, n_chains=2, num_reps=300)
    b = fit(data, seed=2, n_chains=2, num_reps=300)
    c = fit(data, seed=3, n_chains=2, num_reps=300)
    for nm in a.names:
        np.testing.assert_array_equal(a.column(nm), b.column(nm))
    assert not np.array_equal(a.column("beta1[x]"), c.column("beta1[x]"))


def test_threads_do_not_change_draws():
    data = _simulated()
    cfg = AFTConfig(num_reps=200, n_chains=2, seed=4)
    starts = init_start_values_aft(data, 2, 4)
    a = mcmc_aft(data, AFTHyper(), starts, cfg, threads=1)
    b = mcmc_aft(data, AFTHyper(), starts, cfg, threads=2)
    np.testing.assert_array_equal(a.column("theta"), b.column("theta"))


class _Scripted:
    """Generator stub returning fixed Normal and Uniform values."""

    def __init__(self, z, u):
        self.z, self.u = z, u

    def standard_normal(self, *a):
        return self.z

    def random(self, *a):
        return self.u


def _log_joint(model, state, hyper):
    a, b = hyper.theta
    return (model.loglik(state) + float(np.sum(stats.norm.logpdf(state.gamma, 0, math.sqrt(state.theta))))
            + stats.invgamma.logpdf(state.theta, a, scale=b))


def test_scale_move_acceptance_matches_transformed_joint():
    data = _simulated(8, 6)
    hyper = AFTHyper(theta=(1.5, 0.4))
    model = AFTModel(data, hyper, AFTConfig(num_reps=1, tuning=AFTTuning(scale_prop_var=1.0)))
    (start,) = init_start_values_aft(data, 1, 6)
    start.gamma = np.linspace(-0.4, 0.5, 8)
    for z in (1.5, -1.5):
        c = math.exp(z)
        moved = start.copy()
        moved.gamma, moved.theta = start.gamma * c, start.theta * c * c
        # the map scales n frailties by c and theta by c^2
        log_r = _log_joint(model, moved, hyper) - _log_joint(model, start, hyper) + (len(start.gamma) + 2) * z
        assert log_r < 0
        for factor, accepted in ((1 - 1e-9, True), (1 + 1e-9, False)):
            st_ = start.copy()
            acc = {"scale": [0, 0]}
            model.update_scale(st_, _Scripted(z, math.exp(log_r) * factor), acc)
            assert acc["scale"] == [int(accepted), 1]
            assert (st_.theta == moved.theta) is accepted


@pytest.mark.parametrize("kw", [dict(num_reps=1, thin=2), dict(num_reps=2, burnin_perc=1.0), dict(num_reps=2, n_chains=0),
                                dict(num_reps=2, nY1_save=-1)])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        AFTConfig(**kw)


@pytest.mark.parametrize("kw", [dict(theta=(0.0, 1.0)), dict(LN=((1.0, -1.0),) * 3)])
def test_hyper_invariants(kw):
    with pytest.raises(ValueError, match="positive"):
        AFTHyper(**kw)


def test_tuning_from_dict():
    cfg = AFTConfig(num_reps=2, tuning={"gamma_prop_var": 0.2})
    assert cfg.tuning.gamma_prop_var == 0.2
    with pytest.raises(ValueError):
        AFTTuning(mug_prop_var=(0.1, 0.0, 0.1))


def test_empty_state_layout():
    e = np.zeros(0)
    s = AFTState([e, e, e], np.zeros(3), np.ones(3), 1.0, e, e, e)
    assert s.present.shape == (0,)
