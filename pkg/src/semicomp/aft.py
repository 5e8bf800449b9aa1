"""Bayesian log-Normal AFT illness-death model with data augmentation.

Latent times follow

    log T1 = x1'b1 + gamma + e1,   log T2 = x2'b2 + gamma + e2,
    log(T2 - T1) = x3'b3 + gamma + e3   (only when T1 < T2),

with ``e_g ~ Normal(mu_g, sigma2_g)`` and ``gamma ~ Normal(0, theta)``.  A
subject's non-terminal event is *present* when ``T1 < T2`` and *absent*
otherwise; the sampler carries the status explicitly.  Observed data are
intervals ``[y1L, y1U]`` and ``[y2L, y2U]`` plus a left-truncation time.

Complete-data density of one subject (times on the original scale)::

    present: N(log t1; m1, s1) / t1 * P(T2 > t1) * N(log(t2-t1); m3, s3) / (t2-t1)
    absent:  N(log t2; m2, s2) / t2 * P(T1 > t2)

divided by ``P(T1 > L) P(T2 > L)`` under left truncation at ``L > 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from .bayes_phr import MCMC_STREAM, START_STREAM, _triple, substream
from .data import IntervalDataset, PreconditionError, validate_intervals
from .samples import PosteriorSamples, retained_count
from .truncnorm import log_normal_mass, rtruncnorm

__all__ = [
    "AFTConfig",
    "AFTHyper",
    "AFTModel",
    "AFTState",
    "AFTTuning",
    "init_start_values_aft",
    "mcmc_aft",
    "theta_full_conditional_aft",
]

_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class AFTHyper:
    """Inverse-Gamma (shape, scale) priors for the frailty and error variances."""

    theta: tuple = (0.5, 0.05)
    LN: tuple = ((0.5, 0.05),) * 3

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        ln = _triple(self.LN, "LN")
        object.__setattr__(self, "LN", ln)
        vals = list(self.theta) + [x for p in ln for x in p]
        if len(self.theta) != 2 or any(len(p) != 2 for p in ln) or not all(v > 0 and math.isfinite(v) for v in vals):
            raise ValueError("AFT hyperparameters must be finite and strictly positive")

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "LN": [list(p) for p in self.LN]}


@dataclass(frozen=True)
class AFTTuning:
    betag_prop_var: tuple = (0.01, 0.01, 0.01)
    mug_prop_var: tuple = (0.01, 0.01, 0.01)
    zetag_prop_var: tuple = (0.01, 0.01, 0.01)
    gamma_prop_var: float = 0.1
    scale_prop_var: float = 0.01

    def __post_init__(self):
        for name in ("betag_prop_var", "mug_prop_var", "zetag_prop_var"):
            v = _triple(getattr(self, name), name)
            if min(v) <= 0:
                raise ValueError(f"{name} must be positive")
            object.__setattr__(self, name, v)
        if not (self.gamma_prop_var > 0 and self.scale_prop_var > 0):
            raise ValueError("gamma_prop_var and scale_prop_var must be positive")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class AFTConfig:
    num_reps: int
    thin: int = 1
    burnin_perc: float = 0.5
    n_chains: int = 1
    seed: int = 0
    tuning: AFTTuning = field(default_factory=AFTTuning)
    nGam_save: int = 0
    nY1_save: int = 0
    nY2_save: int = 0
    debug: bool = False

    def __post_init__(self):
        if not (int(self.num_reps) >= int(self.thin) >= 1):
            raise ValueError("num_reps: need num_reps >= thin >= 1")
        if not 0 <= self.burnin_perc < 1:
            raise ValueError("burnin_perc must lie in [0, 1)")
        if int(self.n_chains) < 1:
            raise ValueError("n_chains must be at least 1")
        if isinstance(self.tuning, dict):
            object.__setattr__(self, "tuning", AFTTuning(**self.tuning))
        if min(self.nGam_save, self.nY1_save, self.nY2_save) < 0:
            raise ValueError("storage counts must be non-negative")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["tuning"] = self.tuning.to_dict()
        return d


@dataclass
class AFTState:
    beta: list
    mu: np.ndarray
    sigma2: np.ndarray
    theta: float
    gamma: np.ndarray
    t1: np.ndarray        # NaN where the non-terminal event is absent
    t2: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.t1)

    def copy(self) -> "AFTState":
        return AFTState([b.copy() for b in self.beta], self.mu.copy(), self.sigma2.copy(), self.theta,
                        self.gamma.copy(), self.t1.copy(), self.t2.copy())


def theta_full_conditional_aft(gamma, prior):
    """Inverse-Gamma (shape, scale) full conditional of the frailty variance."""
    g = np.asarray(gamma, dtype=float)
    a, b = prior
    return a + len(g) / 2.0, b + float(np.dot(g, g)) / 2.0


def _lognorm(x, m, s):
    return -0.5 * _LOG_2PI - np.log(s) - 0.5 * ((x - m) / s) ** 2


def _logsf(x, m, s):
    return log_ndtr(-(x - m) / s)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


class AFTModel:
    """Interval data, feasibility sets and priors of one AFT fit."""

    def __init__(self, data: IntervalDataset, hyper: AFTHyper, config: AFTConfig):
        viol = validate_intervals(data)
        if viol:
            raise PreconditionError("interval dataset fails validation", viol)
        self.data = data
        self.hyper = hyper
        self.config = config
        self.n = len(data)
        self.X = [data.x1, data.x2, data.x3]
        self.names = [data.covariate_names(g) for g in (1, 2, 3)]
        LT = data.LT
        self.lo1 = np.maximum(data.y1L, LT)
        self.hi1 = data.y1U
        self.lo2 = np.maximum(data.y2L, LT)
        self.hi2 = data.y2U
        self.lo2_abs = np.maximum(self.lo2, data.y1L)
        self.fixed1 = self.lo1 == self.hi1
        self.fixed2 = self.lo2 == self.hi2
        self.can_present = self.lo1 < self.hi2
        self.can_absent = np.isinf(self.hi1) & (self.lo2_abs <= self.hi2)
        impossible = ~(self.can_present | self.can_absent)
        if np.any(impossible):
            raise PreconditionError(f"subject {int(np.flatnonzero(impossible)[0])}: bounds admit no event history", [])
        self.switchable = self.can_present & self.can_absent
        self.truncated = LT > 0
        self.any_truncated = bool(np.any(self.truncated))
        self.logLT = np.where(self.truncated, _log(np.where(self.truncated, LT, 1.0)), 0.0)
        self.blocks = [("beta", g) for g in range(3) if self.X[g].shape[1] > 0]
        self.blocks += [("mu", g) for g in range(3)] + [("zeta", g) for g in range(3)]
        self.blocks += [("gamma", None), ("theta", None), ("scale", None)]

    # --- model pieces ----------------------------------------------------------

    def means(self, state, beta=None, mu=None, gamma=None):
        beta = state.beta if beta is None else beta
        mu = state.mu if mu is None else mu
        gamma = state.gamma if gamma is None else gamma
        out = []
        for g in range(3):
            lp = self.X[g] @ beta[g] if self.X[g].shape[1] else 0.0
            out.append(lp + gamma + mu[g])
        return out

    def subject_loglik(self, state, beta=None, mu=None, sigma2=None, gamma=None) -> np.ndarray:
        """Complete-data log-likelihood of each subject, up to parameter-free terms."""
        m1, m2, m3 = self.means(state, beta, mu, gamma)
        s1, s2, s3 = np.sqrt(state.sigma2 if sigma2 is None else sigma2)
        pres = state.present
        p, a = np.flatnonzero(pres), np.flatnonzero(~pres)
        ll = np.empty(self.n)
        l1 = np.log(state.t1[p])
        lsoj = np.log(state.t2[p] - state.t1[p])
        ll[p] = _lognorm(l1, m1[p], s1) + _logsf(l1, m2[p], s2) + _lognorm(lsoj, m3[p], s3)
        l2 = np.log(state.t2[a])
        ll[a] = _lognorm(l2, m2[a], s2) + _logsf(l2, m1[a], s1)
        if self.any_truncated:
            t = self.truncated
            ll[t] -= _logsf(self.logLT[t], m1[t], s1) + _logsf(self.logLT[t], m2[t], s2)
        return ll

    def loglik(self, state, **kw) -> float:
        return float(np.sum(self.subject_loglik(state, **kw))) if self.n else 0.0

    def _switch_log_ratio(self, m, s, t1, t2, lo1):
        """Log acceptance of absent -> present for t2 held fixed and a new t1."""
        m1, m2, m3 = m
        s1, s2, s3 = s
        l1, l2 = np.log(t1), np.log(t2)
        soj = t2 - t1
        log_z = log_normal_mass((_log(lo1) - m1) / s1, (l2 - m1) / s1)
        num = log_z + _logsf(l1, m2, s2) + _lognorm(np.log(soj), m3, s3) - np.log(soj)
        den = _lognorm(l2, m2, s2) - l2 + _logsf(l2, m1, s1)
        return num - den

    # --- imputation ---------------------------------------------------------------

    def impute(self, state, rng):
        m = self.means(state)
        s = tuple(np.sqrt(state.sigma2))
        m1, m2, m3 = m
        s1, s2, s3 = s
        n = self.n
        if n == 0:
            return

        # present <-> absent switch, t2 held fixed
        idx = np.flatnonzero(self.switchable)
        if idx.size:
            pres = state.present[idx]
            t2 = state.t2[idx]
            lo1 = self.lo1[idx]
            t1 = state.t1[idx].copy()
            grow = ~pres & (lo1 < t2)
            if np.any(grow):
                a = idx[grow]
                draw = rtruncnorm(rng, m1[a], s1, _log(lo1[grow]), np.log(t2[grow]))
                t1[grow] = np.clip(np.exp(draw), lo1[grow], t2[grow])
            live = (pres | grow) & (t1 < t2)
            u = np.log(rng.random(idx.size))
            j = np.flatnonzero(live)
            mm = [mi[idx[j]] for mi in m]
            r = self._switch_log_ratio(mm, s, t1[j], t2[j], lo1[j])
            log_r = np.where(pres[j], -r, r)
            acc = j[u[j] < log_r]
            state.t1[idx[acc]] = np.where(pres[acc], np.nan, t1[acc])

        pres = state.present
        # t1 given t2 for present subjects with a non-degenerate interval
        idx = np.flatnonzero(pres & ~self.fixed1)
        if idx.size:
            t2 = state.t2[idx]
            lo, hi = self.lo1[idx], np.minimum(self.hi1[idx], t2)
            mi1, mi2, mi3 = (mi[idx] for mi in m)
            prop = np.clip(np.exp(rtruncnorm(rng, mi1, s1, _log(lo), np.log(hi))), lo, hi)
            cur = state.t1[idx]

            def target(t1):
                with np.errstate(invalid="ignore", divide="ignore"):
                    soj = t2 - t1
                    val = _logsf(np.log(t1), mi2, s2) + _lognorm(_log(soj), mi3, s3) - _log(soj)
                return np.where(soj > 0, val, -np.inf)

            log_r = target(prop) - target(cur)
            acc = np.log(rng.random(idx.size)) < log_r
            state.t1[idx[acc]] = prop[acc]

        # t2 for present subjects: exact draw of the log sojourn
        idx = np.flatnonzero(pres & ~self.fixed2)
        if idx.size:
            t1 = state.t1[idx]
            lo = np.maximum(self.lo2[idx] - t1, 0.0)
            hi = self.hi2[idx] - t1
            ls = rtruncnorm(rng, m3[idx], s3, _log(lo), np.log(hi))
            t2 = np.clip(t1 + np.exp(ls), self.lo2[idx], self.hi2[idx])
            t2 = np.where(t2 > t1, t2, np.nextafter(t1, np.inf))
            state.t2[idx] = t2

        # t2 for absent subjects: independence MH with the Normal part as proposal
        idx = np.flatnonzero(~pres & ~(self.lo2_abs == self.hi2))
        if idx.size:
            lo, hi = self.lo2_abs[idx], self.hi2[idx]
            prop = np.clip(np.exp(rtruncnorm(rng, m2[idx], s2, _log(lo), np.log(hi))), lo, hi)
            cur = state.t2[idx]
            log_r = _logsf(np.log(prop), m1[idx], s1) - _logsf(np.log(cur), m1[idx], s1)
            acc = np.log(rng.random(idx.size)) < log_r
            state.t2[idx[acc]] = prop[acc]
        fixed_abs = ~pres & (self.lo2_abs == self.hi2)
        state.t2[fixed_abs] = self.hi2[fixed_abs]

    def check_state(self, state):
        pres = state.present
        t1, t2 = state.t1, state.t2
        if np.any(pres & ~self.can_present) or np.any(~pres & ~self.can_absent):
            raise AssertionError("latent status outside the feasible set")
        if np.any(pres & ((t1 < self.lo1) | (t1 > self.hi1) | (t1 >= t2))):
            raise AssertionError("latent non-terminal time violates its constraints")
        if np.any((t2 < self.lo2) | (t2 > self.hi2)) or np.any(~pres & (t2 < self.lo2_abs)):
            raise AssertionError("latent terminal time violates its constraints")
        if not (np.all(state.sigma2 > 0) and state.theta > 0):
            raise AssertionError("variances must stay positive")

    # --- parameter updates ------------------------------------------------------------

    def block_loglik(self, state, g, beta_g=None, mu_g=None, sigma2_g=None) -> float:
        """Sum of the complete-data terms that involve transition ``g``'s parameters."""
        if self.n == 0:
            return 0.0
        b = state.beta[g] if beta_g is None else beta_g
        m = (self.X[g] @ b if len(b) else 0.0) + state.gamma + (state.mu[g] if mu_g is None else mu_g)
        s = math.sqrt(state.sigma2[g] if sigma2_g is None else sigma2_g)
        pres = state.present
        p, a = np.flatnonzero(pres), np.flatnonzero(~pres)
        if g == 2:
            return float(np.sum(_lognorm(np.log(state.t2[p] - state.t1[p]), m[p], s)))
        l1, l2 = np.log(state.t1[p]), np.log(state.t2[a])
        if g == 0:
            ll = np.sum(_lognorm(l1, m[p], s)) + np.sum(_logsf(l2, m[a], s))
        else:
            ll = np.sum(_logsf(l1, m[p], s)) + np.sum(_lognorm(l2, m[a], s))
        if self.any_truncated:
            t = self.truncated
            ll -= np.sum(_logsf(self.logLT[t], m[t], s))
        return float(ll)

    def update_beta(self, state, g, rng, acc):
        sd = math.sqrt(self.config.tuning.betag_prop_var[g])
        cur_ll = self.block_loglik(state, g)
        for j in range(self.X[g].shape[1]):
            beta = state.beta[g].copy()
            beta[j] += sd * rng.standard_normal()
            new_ll = self.block_loglik(state, g, beta_g=beta)
            acc[f"beta{g + 1}"][1] += 1
            if math.log(rng.random()) < new_ll - cur_ll:
                state.beta[g] = beta
                cur_ll = new_ll
                acc[f"beta{g + 1}"][0] += 1

    def update_mu(self, state, g, rng, acc):
        prop = state.mu[g] + math.sqrt(self.config.tuning.mug_prop_var[g]) * rng.standard_normal()
        log_r = self.block_loglik(state, g, mu_g=prop) - self.block_loglik(state, g)
        acc[f"mu{g + 1}"][1] += 1
        if math.log(rng.random()) < log_r:
            state.mu[g] = prop
            acc[f"mu{g + 1}"][0] += 1

    def log_post_log_zeta(self, state, g, sigma2_g) -> float:
        """Log target of ``log(1/sigma2_g)``, Jacobian included."""
        a, b = self.hyper.LN[g]
        zeta = 1.0 / sigma2_g
        return self.block_loglik(state, g, sigma2_g=sigma2_g) + a * math.log(zeta) - b * zeta

    def update_zeta(self, state, g, rng, acc):
        cur = state.sigma2[g]
        prop = cur * math.exp(-math.sqrt(self.config.tuning.zetag_prop_var[g]) * rng.standard_normal())
        log_r = self.log_post_log_zeta(state, g, prop) - self.log_post_log_zeta(state, g, cur)
        acc[f"zeta{g + 1}"][1] += 1
        if math.log(rng.random()) < log_r:
            state.sigma2[g] = prop
            acc[f"zeta{g + 1}"][0] += 1

    def update_gamma(self, state, rng, acc):
        if self.n == 0:
            return
        prop = state.gamma + math.sqrt(self.config.tuning.gamma_prop_var) * rng.standard_normal(self.n)
        log_r = (self.subject_loglik(state, gamma=prop) - self.subject_loglik(state)
                 - (prop ** 2 - state.gamma ** 2) / (2 * state.theta))
        ok = np.log(rng.random(self.n)) < log_r
        state.gamma = np.where(ok, prop, state.gamma)
        acc["gamma"][0] += int(ok.sum())
        acc["gamma"][1] += self.n

    def update_theta(self, state, rng, acc):
        shape, scale = theta_full_conditional_aft(state.gamma, self.hyper.theta)
        state.theta = scale / rng.gamma(shape)

    def update_scale(self, state, rng, acc):
        """Joint move ``gamma -> c * gamma``, ``theta -> c**2 * theta``.

        Lets the chain leave the region where a small ``theta`` pins every
        frailty near zero.  The Normal frailty density is invariant under the
        map up to the Jacobian, which leaves ``c**2`` times the prior ratio
        of ``theta`` and the likelihood ratio.
        """
        if self.n == 0:
            return
        log_c = math.sqrt(self.config.tuning.scale_prop_var) * rng.standard_normal()
        c = math.exp(log_c)
        a, b = self.hyper.theta
        theta_new = state.theta * c * c
        gamma_new = state.gamma * c
        log_prior = lambda th: -(a + 1.0) * math.log(th) - b / th  # noqa: E731
        log_r = (self.loglik(state, gamma=gamma_new) - self.loglik(state)
                 + log_prior(theta_new) - log_prior(state.theta) + 2.0 * log_c)
        acc["scale"][1] += 1
        if math.log(rng.random()) < log_r:
            state.gamma = gamma_new
            state.theta = theta_new
            acc["scale"][0] += 1

    def scan(self, state, rng, acc):
        self.impute(state, rng)
        kind, g = self.blocks[int(rng.integers(len(self.blocks)))]
        if g is None:
            getattr(self, f"update_{kind}")(state, rng, acc)
        else:
            getattr(self, f"update_{kind}")(state, g, rng, acc)

    # --- storage ---------------------------------------------------------------------

    def columns(self):
        cols = []
        for g in range(3):
            cols += [f"beta{g + 1}[{nm}]" for nm in self.names[g]]
        cols += [f"mu{g + 1}" for g in range(3)] + [f"sigma2_{g + 1}" for g in range(3)] + ["theta"]
        cfg = self.config
        cols += [f"gamma[{i}]" for i in range(1, min(cfg.nGam_save, self.n) + 1)]
        cols += [f"y1[{i}]" for i in range(1, min(cfg.nY1_save, self.n) + 1)]
        cols += [f"y2[{i}]" for i in range(1, min(cfg.nY2_save, self.n) + 1)]
        return cols

    def record(self, state):
        cfg = self.config
        row = [v for b in state.beta for v in b] + list(state.mu) + list(state.sigma2) + [state.theta]
        row += list(state.gamma[: min(cfg.nGam_save, self.n)])
        row += list(state.t1[: min(cfg.nY1_save, self.n)])
        row += list(state.t2[: min(cfg.nY2_save, self.n)])
        return row


def _start_time(lo, hi):
    """Midpoint of a finite interval, twice the lower bound (or 1) otherwise."""
    if hi == lo:
        return lo
    if math.isinf(hi):
        return 2.0 * lo if lo > 0 else 1.0
    return 0.5 * (lo + hi)


def init_start_values_aft(data: IntervalDataset, n_chains: int, seed: int) -> list[AFTState]:
    """Starting states with latent times placed inside their intervals."""
    if int(n_chains) < 1:
        raise ValueError("n_chains must be at least 1")
    model = AFTModel(data, AFTHyper(), AFTConfig(num_reps=1))
    n = len(data)
    t1 = np.full(n, np.nan)
    t2 = np.empty(n)
    for i in range(n):
        present = bool(np.isfinite(model.hi1[i])) or not model.can_absent[i]
        if present:
            lo1, hi1 = model.lo1[i], min(model.hi1[i], model.hi2[i])
            a = _start_time(lo1, hi1)
            if not a < model.hi2[i]:
                a = 0.5 * (lo1 + model.hi2[i])
            t1[i] = a
            lo2 = max(model.lo2[i], a)
            b = _start_time(lo2, model.hi2[i])
            t2[i] = b if b > a else (0.5 * (a + model.hi2[i]) if np.isfinite(model.hi2[i]) else 2.0 * a)
        else:
            t2[i] = _start_time(model.lo2_abs[i], model.hi2[i])
    mu0, var0 = [], []
    finite1 = np.isfinite(data.y1U)
    groups = [
        (finite1, lambda: np.log(0.5 * (data.y1L + data.y1U))),
        (np.isfinite(data.y2U) & ~finite1, lambda: np.log(0.5 * (data.y2L + data.y2U))),
        (finite1 & np.isfinite(data.y2U), lambda: _log(0.5 * (data.y2L + data.y2U) - 0.5 * (data.y1L + data.y1U))),
    ]
    for g, (mask, vals) in enumerate(groups, start=1):
        with np.errstate(invalid="ignore", divide="ignore"):
            v = vals()[mask]
        v = v[np.isfinite(v)]
        if v.size == 0:
            raise ValueError(f"transition {g}: no finite intervals to build starting values from")
        mu0.append(float(v.mean()))
        var0.append(float(v.var()) if v.size > 1 and v.var() > 0 else 1.0)
    starts = []
    for c in range(int(n_chains)):
        rng = substream(seed, START_STREAM + c)
        beta = [0.1 * rng.standard_normal(x.shape[1]) for x in model.X]
        starts.append(AFTState(beta, np.array(mu0), np.array(var0), 0.5, np.zeros(n), t1.copy(), t2.copy()))
    return starts


def _run_chain(model: AFTModel, start: AFTState, chain: int):
    cfg = model.config
    rng = substream(cfg.seed, MCMC_STREAM + chain)
    state = start.copy()
    model.check_state(state)
    keys = [f"{k}{g}" for k in ("beta", "mu", "zeta") for g in (1, 2, 3)] + ["gamma", "scale"]
    acc = {k: [0, 0] for k in keys}
    stored = cfg.num_reps // cfg.thin
    burn = stored - retained_count(cfg.num_reps, cfg.thin, cfg.burnin_perc)
    cols = model.columns()
    draws = np.empty((stored - burn, len(cols)))
    for scan in range(1, cfg.num_reps + 1):
        model.scan(state, rng, acc)
        if cfg.debug:
            model.check_state(state)
        if scan % cfg.thin == 0:
            k = scan // cfg.thin - 1 - burn
            if k >= 0:
                draws[k] = model.record(state)
    columns = {name: draws[:, j].copy() for j, name in enumerate(cols)}
    rates = {k: {"accepted": v[0], "proposed": v[1]} for k, v in acc.items() if v[1] > 0}
    return columns, rates


def mcmc_aft(data: IntervalDataset, hyper: AFTHyper, starts: list[AFTState], config: AFTConfig,
             threads: int = 1) -> PosteriorSamples:
    """Run ``config.n_chains`` chains of the AFT sampler."""
    if len(starts) != config.n_chains:
        raise ValueError(f"starts: expected {config.n_chains} start states, got {len(starts)}")
    model = AFTModel(data, hyper, config)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_chain(model, starts[c], c), range(len(starts))))
    else:
        results = [_run_chain(model, st, c) for c, st in enumerate(starts)]
    meta = {
        "sampler": "aft",
        "n_chains": len(starts),
        "n_draws": retained_count(config.num_reps, config.thin, config.burnin_perc),
        "hyper": hyper.to_dict(),
        "config": config.to_dict(),
        "acceptance": [r[1] for r in results],
        "n_subjects": model.n,
        "latent": "y1[i] is NaN in draws where the non-terminal event is absent",
    }
    return PosteriorSamples([r[0] for r in results], meta, [{} for _ in results])
