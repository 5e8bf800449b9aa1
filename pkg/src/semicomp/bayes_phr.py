"""MCMC for Bayesian proportional-hazards illness-death models.

Supported baselines are Weibull (``h0 = alpha * kappa * t**(alpha-1)``) and
piecewise-exponential (PEM) with a reversible-jump partition.  A shared
Gamma(1/theta, 1/theta) frailty is optional, and Weibull models may add
trivariate Normal cluster effects with an inverse-Wishart covariance prior.

Each scan picks a single update block at random.  The birth/death block of
transition ``g`` is chosen with probability ``Cg[g]``; all other applicable
blocks share the remaining probability equally.  Most updates condition on
the frailties ``gamma``.  The Metropolis steps for ``log alpha_g`` and
``log theta`` are joint moves: ``kappa_g`` (resp. ``gamma``) is integrated out
of the acceptance ratio and redrawn from its full conditional on acceptance,
which breaks the near-deterministic coupling between each pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .data import ModelSpec, PreconditionError, SemiCompDataset, validate
from .freq import id_transitions
from .pem import PEMBaseline, birth_split, candidate_cells, death_merge, split_candidates
from .samples import PosteriorSamples, retained_count

__all__ = [
    "MCMCConfig",
    "PHRHyper",
    "PHRModel",
    "PHRState",
    "gamma_full_conditional",
    "init_start_values_phr",
    "kappa_full_conditional",
    "mcmc_phr",
    "mu_full_conditional",
    "precision_full_conditional",
    "sigmaV_full_conditional",
]

MCMC_STREAM = 0
START_STREAM = 10_000


def substream(seed: int, offset: int) -> np.random.Generator:
    """Independent generator for component ``offset`` of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(offset),)))


def _triple(v, label, cast=float):
    v = tuple(v) if isinstance(v, (list, tuple, np.ndarray)) else (v, v, v)
    if len(v) != 3:
        raise ValueError(f"{label}: need one value per transition")
    return tuple(cast(x) if not isinstance(x, (list, tuple)) else tuple(cast(y) for y in x) for x in v)


@dataclass(frozen=True)
class PHRHyper:
    """Prior hyperparameters; pairs are (shape, rate)."""

    theta: tuple = (0.7, 0.7)
    WB_alpha: tuple = ((0.5, 0.01),) * 3
    WB_kappa: tuple = ((0.5, 0.05),) * 3
    PEM_sigma: tuple = ((0.7, 0.7),) * 3
    PEM_alphaK: tuple = (10.0, 10.0, 10.0)
    Psi_v: np.ndarray = field(default_factory=lambda: np.eye(3))
    rho_v: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        for name in ("WB_alpha", "WB_kappa", "PEM_sigma"):
            v = _triple(getattr(self, name), name)
            if any(len(p) != 2 for p in v):
                raise ValueError(f"{name}: each transition needs a (shape, rate) pair")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "PEM_alphaK", _triple(self.PEM_alphaK, "PEM_alphaK"))
        flat = list(self.theta) + [x for n in ("WB_alpha", "WB_kappa", "PEM_sigma") for p in getattr(self, n) for x in p]
        flat += list(self.PEM_alphaK)
        if len(self.theta) != 2 or not all(x > 0 and math.isfinite(x) for x in flat):
            raise ValueError("hyperparameters must be finite and strictly positive")
        psi = np.array(self.Psi_v, dtype=float)
        if psi.shape != (3, 3) or not np.allclose(psi, psi.T):
            raise ValueError("Psi_v must be a symmetric 3x3 matrix")
        try:
            np.linalg.cholesky(psi)
        except np.linalg.LinAlgError:
            raise ValueError("Psi_v must be positive definite") from None
        psi.setflags(write=False)
        object.__setattr__(self, "Psi_v", psi)
        if not float(self.rho_v) > 2:
            raise ValueError("rho_v must exceed 2")
        object.__setattr__(self, "rho_v", float(self.rho_v))

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "WB_alpha": [list(p) for p in self.WB_alpha],
                "WB_kappa": [list(p) for p in self.WB_kappa], "PEM_sigma": [list(p) for p in self.PEM_sigma],
                "PEM_alphaK": list(self.PEM_alphaK), "Psi_v": self.Psi_v.tolist(), "rho_v": self.rho_v}

    @classmethod
    def from_dict(cls, d: dict) -> "PHRHyper":
        return cls(**d)


@dataclass(frozen=True)
class MCMCConfig:
    num_reps: int
    thin: int = 1
    burnin_perc: float = 0.5
    n_chains: int = 1
    seed: int = 0
    mhProp_theta_var: float = 0.05
    mhProp_alphag_var: tuple = (0.01, 0.01, 0.01)
    mhProp_Vg_var: tuple = (0.05, 0.05, 0.05)
    beta_prop_var: float = 0.01
    lambda_prop_var: float = 0.1
    Cg: tuple = (0.2, 0.2, 0.2)
    delPertg: tuple = (0.5, 0.5, 0.5)
    rj_scheme: int = 1
    Kg_max: tuple = (50, 50, 50)
    sg_max: tuple | None = None
    time_lambda: tuple | None = None
    nGam_save: int = 0
    storeV: bool = False
    debug: bool = False

    def __post_init__(self):
        if not (int(self.num_reps) >= int(self.thin) >= 1):
            raise ValueError("num_reps: need num_reps >= thin >= 1")
        if not 0 <= self.burnin_perc < 1:
            raise ValueError("burnin_perc must lie in [0, 1)")
        if int(self.n_chains) < 1:
            raise ValueError("n_chains must be at least 1")
        for name in ("mhProp_alphag_var", "mhProp_Vg_var", "Cg", "delPertg"):
            object.__setattr__(self, name, _triple(getattr(self, name), name))
        object.__setattr__(self, "Kg_max", _triple(self.Kg_max, "Kg_max", int))
        if self.sg_max is not None:
            object.__setattr__(self, "sg_max", _triple(self.sg_max, "sg_max"))
            if min(self.sg_max) <= 0:
                raise ValueError("sg_max must be positive")
        if self.time_lambda is not None:
            grids = tuple(tuple(float(t) for t in grid) for grid in self.time_lambda)
            if len(grids) != 3 or any(t <= 0 for grid in grids for t in grid):
                raise ValueError("time_lambda: need three grids of positive times")
            object.__setattr__(self, "time_lambda", grids)
        for name in ("mhProp_theta_var", "beta_prop_var", "lambda_prop_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.mhProp_alphag_var) <= 0 or min(self.mhProp_Vg_var) <= 0:
            raise ValueError("proposal variances must be positive")
        if min(self.Cg) < 0 or sum(self.Cg) > 0.6 + 1e-12:
            raise ValueError("Cg: proportions must be non-negative with sum <= 0.6")
        if not all(0 < d <= 0.5 for d in self.delPertg):
            raise ValueError("delPertg: values must lie in (0, 0.5]")
        if self.rj_scheme not in (1, 2):
            raise ValueError("rj_scheme must be 1 or 2")
        if min(self.Kg_max) < 0:
            raise ValueError("Kg_max must be non-negative")
        if self.nGam_save < 0:
            raise ValueError("nGam_save must be non-negative")

    def to_dict(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            out[k] = [list(x) for x in v] if k == "time_lambda" and v is not None else (list(v) if isinstance(v, tuple) else v)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MCMCConfig":
        return cls(**d)


@dataclass
class PHRState:
    beta: list
    alpha: np.ndarray | None = None
    kappa: np.ndarray | None = None
    pem: list | None = None
    theta: float | None = None
    gamma: np.ndarray | None = None
    V: np.ndarray | None = None
    SigmaV: np.ndarray | None = None

    def copy(self) -> "PHRState":
        c = lambda a: None if a is None else np.array(a, dtype=float)  # noqa: E731
        return PHRState([b.copy() for b in self.beta], c(self.alpha), c(self.kappa),
                        None if self.pem is None else [p.copy() for p in self.pem],
                        self.theta, c(self.gamma), c(self.V), c(self.SigmaV))


# closed-form full conditionals, (shape, rate) unless stated otherwise

def gamma_full_conditional(d, Lambda, theta):
    """Frailty given everything else: Gamma(1/theta + d, 1/theta + Lambda)."""
    return 1.0 / theta + np.asarray(d, dtype=float), 1.0 / theta + np.asarray(Lambda, dtype=float)


def kappa_full_conditional(prior, n_events, exposure):
    c, d = prior
    return c + n_events, d + exposure


def precision_full_conditional(lam, mu, prior):
    """Gamma full conditional of ``1/sigma2_lambda`` with identity height covariance."""
    a, b = prior
    r = np.asarray(lam, dtype=float) - mu
    return a + len(r) / 2.0, b + float(np.dot(r, r)) / 2.0


def mu_full_conditional(lam, sigma2):
    """Normal (mean, variance) of the height mean under a flat prior."""
    lam = np.asarray(lam, dtype=float)
    return float(lam.mean()), sigma2 / len(lam)


def sigmaV_full_conditional(V, Psi, rho):
    """Inverse-Wishart (df, scale) for the cluster-effect covariance."""
    V = np.asarray(V, dtype=float).reshape(-1, 3)
    return rho + V.shape[0], np.asarray(Psi, dtype=float) + V.T @ V


def _move_probs(K, n_avail, k_max):
    can_birth = K < k_max and n_avail > 0
    can_death = K > 0
    if can_birth and can_death:
        return 0.5, 0.5
    return float(can_birth), float(can_death)


def _weibull_w(start, end, alpha):
    return end ** alpha - np.where(start > 0, start, 0.0) ** alpha


class PHRModel:
    """Data, model and priors for one PHR illness-death fit.

    Holds everything a chain needs besides its state and generator; the
    methods compute conditional log-targets and perform single-block updates.
    """

    def __init__(self, dataset: SemiCompDataset, spec: ModelSpec, hyper: PHRHyper, config: MCMCConfig):
        if spec.family != "PHR" or spec.framework != "bayesian" or spec.analysis != "illness-death":
            raise ValueError("spec: need a Bayesian PHR illness-death model")
        if spec.baseline not in ("Weibull", "PEM"):
            raise ValueError("spec.baseline must be Weibull or PEM")
        viol = validate(dataset)
        if viol:
            raise PreconditionError("dataset fails validation", viol)
        if spec.clustered and dataset.cluster is None:
            raise ValueError("spec requests cluster effects but the dataset has no cluster column")
        self.dataset = dataset
        self.spec = spec
        self.hyper = hyper
        self.config = config
        self.n = len(dataset)
        self.tr = id_transitions(dataset, spec.markov)
        self.d = (dataset.event1 + dataset.event2).astype(float)
        self.pem = spec.baseline == "PEM"
        self.names = [dataset.covariate_names(g) for g in (1, 2, 3)]
        for tr in self.tr:
            tr.ev_idx = np.flatnonzero(tr.event > 0)
            tr.log_t = np.log(tr.t_event[tr.ev_idx])
            tr.n_ev = float(len(tr.ev_idx))
        if spec.clustered:
            self.cl = np.asarray(dataset.cluster, dtype=np.int64) - 1
            self.J = int(self.cl.max()) + 1 if self.n else 0
            for tr in self.tr:
                tr.cl = self.cl[tr.rows]
        if self.pem:
            self.sg_max = resolve_sg_max(dataset, spec, config.sg_max)
            self.candidates, self.cells = [], []
            for g, tr in enumerate(self.tr):
                cand = split_candidates(self.sg_max[g], config.rj_scheme, tr.t_event[tr.ev_idx])
                self.candidates.append(cand)
                self.cells.append(candidate_cells(cand, self.sg_max[g]))
        self.blocks = self._blocks()
        self.rj_g = [g for g in range(3) if self.pem and config.Kg_max[g] > 0 and config.Cg[g] > 0]
        self.rj_prob = np.array([config.Cg[g] for g in self.rj_g])

    def _blocks(self):
        blocks = [("beta", g) for g in range(3) if self.tr[g].X.shape[1] > 0]
        for g in range(3):
            blocks += [("lambda", g), ("mu", g), ("sigma", g)] if self.pem else [("alpha", g), ("kappa", g)]
        if self.spec.frailty:
            blocks += [("gamma", None), ("theta", None)]
        if self.spec.clustered:
            blocks += [("V", None), ("SigmaV", None)]
        return blocks

    # --- likelihood pieces -------------------------------------------------

    def eta(self, state, g, beta=None):
        tr = self.tr[g]
        b = state.beta[g] if beta is None else beta
        e = tr.X @ b if len(b) else np.zeros(len(tr.rows))
        if self.spec.clustered:
            e = e + state.V[tr.cl, g]
        return e

    def dH(self, state, g, base=None):
        """Baseline cumulative hazard accrued over each at-risk row."""
        tr = self.tr[g]
        if self.pem:
            b = state.pem[g] if base is None else base
            return b.cum_hazard(tr.end) - b.cum_hazard(tr.start)
        return state.kappa[g] * _weibull_w(tr.start, tr.end, state.alpha[g])

    def log_h0_events(self, state, g, base=None):
        tr = self.tr[g]
        if self.pem:
            b = state.pem[g] if base is None else base
            return b.log_hazard(tr.t_event[tr.ev_idx])
        a = state.alpha[g]
        return math.log(a) + math.log(state.kappa[g]) + (a - 1.0) * tr.log_t

    def gamma_rows(self, state, g):
        return state.gamma[self.tr[g].rows]

    def transition_loglik(self, state, g, beta=None, base=None) -> float:
        """Conditional log-likelihood of transition ``g`` given the frailties."""
        tr = self.tr[g]
        eta = self.eta(state, g, beta)
        ll = float(np.sum(self.log_h0_events(state, g, base)) + np.sum(eta[tr.ev_idx]))
        return ll - float(np.sum(self.gamma_rows(state, g) * np.exp(eta) * self.dH(state, g, base)))

    def subject_cum_hazard(self, state) -> np.ndarray:
        """Frailty-free cumulative hazard of each subject summed over transitions."""
        L = np.zeros(self.n)
        for g, tr in enumerate(self.tr):
            L += np.bincount(tr.rows, weights=np.exp(self.eta(state, g)) * self.dH(state, g), minlength=self.n)
        return L

    def log_post_log_alpha(self, state, g, alpha) -> float:
        """Log target of ``log alpha_g`` with ``kappa_g`` integrated out.

        Includes the Gamma prior on ``alpha_g`` and the log-scale Jacobian.
        """
        a_pr, b_pr = self.hyper.WB_alpha[g]
        c, d = self.hyper.WB_kappa[g]
        tr = self.tr[g]
        w = np.exp(self.eta(state, g)) * self.gamma_rows(state, g)
        exposure = float(np.sum(w * _weibull_w(tr.start, tr.end, alpha)))
        ll = tr.n_ev * math.log(alpha) + (alpha - 1.0) * float(np.sum(tr.log_t))
        ll -= (c + tr.n_ev) * math.log(d + exposure)
        return ll + a_pr * math.log(alpha) - b_pr * alpha

    def log_post_log_theta(self, state, theta, Lambda=None) -> float:
        """Log target of ``log theta`` with the frailties integrated out.

        The prior is Gamma(a, b) on ``1/theta``; ``Lambda`` holds the
        frailty-free cumulative hazards and is recomputed when omitted.
        """
        a, b = self.hyper.theta
        xi = 1.0 / theta
        ll = 0.0
        if self.n:
            L = self.subject_cum_hazard(state) if Lambda is None else Lambda
            d = self.d
            ll = (self.n * (xi * math.log(xi) - math.lgamma(xi)) + float(np.sum(gammaln(xi + d)))
                  - float(np.sum((xi + d) * np.log(xi + L))))
        return ll - a * math.log(theta) - b * xi

    def log_post_V(self, state, V):
        """Per-cluster log target of the cluster effects, shape ``(J,)``."""
        P = np.linalg.inv(state.SigmaV)
        out = -0.5 * np.einsum("ij,jk,ik->i", V, P, V)
        for g, tr in enumerate(self.tr):
            base = tr.X @ state.beta[g] if tr.X.shape[1] else np.zeros(len(tr.rows))
            R = np.bincount(tr.cl, weights=self.gamma_rows(state, g) * np.exp(base) * self.dH(state, g), minlength=self.J)
            E = np.bincount(tr.cl, weights=tr.event, minlength=self.J)
            out += E * V[:, g] - R * np.exp(V[:, g])
        return out

    # --- RJ ------------------------------------------------------------------

    def available(self, base: PEMBaseline, g):
        cand = self.candidates[g]
        return cand[~np.isin(cand, base.s)]

    def log_cell(self, g, s_star) -> float:
        i = int(np.searchsorted(self.candidates[g], s_star))
        return math.log(self.cells[g][i])

    def rj_birth_log_ratio(self, state, g, s_star, u):
        """Proposed state and log acceptance ratio of a birth at ``s_star``."""
        base = state.pem[g]
        K = base.K
        n_avail = len(self.available(base, g))
        pb, _ = _move_probs(K, n_avail, self.config.Kg_max[g])
        new, info = birth_split(base, s_star, u)
        _, pd_new = _move_probs(K + 1, n_avail - 1, self.config.Kg_max[g])
        delta = self.config.delPertg[g]
        log_r = (self.transition_loglik(state, g, base=new) - self.transition_loglik(state, g)
                 + math.log(self.hyper.PEM_alphaK[g] / (K + 1))
                 + info["log_split_prior_ratio"]
                 + new.log_prior_heights() - base.log_prior_heights()
                 + math.log(pd_new / (K + 1)) - math.log(pb / n_avail) + math.log(2 * delta)
                 + self.log_cell(g, s_star) + info["log_jacobian"])
        return new, log_r

    def rj_death_log_ratio(self, state, g, j):
        """Proposed state and log acceptance ratio of removing split ``j``."""
        base = state.pem[g]
        K = base.K
        n_avail = len(self.available(base, g))
        _, pd = _move_probs(K, n_avail, self.config.Kg_max[g])
        new, info = death_merge(base, j)
        delta = self.config.delPertg[g]
        u = info["u"]
        if not (0.5 - delta < u < 0.5 + delta) or not 0 < u < 1:
            return new, -np.inf
        pb_new, _ = _move_probs(K - 1, n_avail + 1, self.config.Kg_max[g])
        log_r = (self.transition_loglik(state, g, base=new) - self.transition_loglik(state, g)
                 - math.log(self.hyper.PEM_alphaK[g] / K)
                 - info["log_split_prior_ratio"]
                 + new.log_prior_heights() - base.log_prior_heights()
                 + math.log(pb_new / (n_avail + 1)) - math.log(2 * delta) - math.log(pd / K)
                 - self.log_cell(g, info["s_star"]) - info["log_jacobian"])
        return new, log_r

    # --- updates -------------------------------------------------------------

    def update_beta(self, state, g, rng, acc):
        tr = self.tr[g]
        sd = math.sqrt(self.config.beta_prop_var)
        eta = self.eta(state, g)
        w = self.gamma_rows(state, g) * np.exp(eta) * self.dH(state, g)
        ev = tr.event
        for j in range(tr.X.shape[1]):
            step = sd * rng.standard_normal()
            xj = tr.X[:, j]
            log_r = step * float(np.dot(ev, xj)) - float(np.sum(w * np.expm1(step * xj)))
            acc[f"beta{g + 1}"][1] += 1
            if math.log(rng.random()) < log_r:
                state.beta[g][j] += step
                w = w * np.exp(step * xj)
                acc[f"beta{g + 1}"][0] += 1

    def update_alpha(self, state, g, rng, acc):
        cur = state.alpha[g]
        prop = cur * math.exp(math.sqrt(self.config.mhProp_alphag_var[g]) * rng.standard_normal())
        log_r = self.log_post_log_alpha(state, g, prop) - self.log_post_log_alpha(state, g, cur)
        acc[f"alpha{g + 1}"][1] += 1
        if math.log(rng.random()) < log_r:
            state.alpha[g] = prop
            self.update_kappa(state, g, rng, acc)
            acc[f"alpha{g + 1}"][0] += 1

    def kappa_conditional(self, state, g):
        tr = self.tr[g]
        w = self.gamma_rows(state, g) * np.exp(self.eta(state, g)) * _weibull_w(tr.start, tr.end, state.alpha[g])
        return kappa_full_conditional(self.hyper.WB_kappa[g], tr.n_ev, float(np.sum(w)))

    def update_kappa(self, state, g, rng, acc):
        shape, rate = self.kappa_conditional(state, g)
        state.kappa[g] = rng.gamma(shape, 1.0 / rate)

    def gamma_conditional(self, state):
        return gamma_full_conditional(self.d, self.subject_cum_hazard(state), state.theta)

    def update_gamma(self, state, rng, acc):
        shape, rate = self.gamma_conditional(state)
        state.gamma = np.maximum(rng.gamma(shape, 1.0 / rate), np.finfo(float).tiny)

    def update_theta(self, state, rng, acc):
        cur = state.theta
        prop = cur * math.exp(math.sqrt(self.config.mhProp_theta_var) * rng.standard_normal())
        L = self.subject_cum_hazard(state) if self.n else None
        log_r = self.log_post_log_theta(state, prop, L) - self.log_post_log_theta(state, cur, L)
        acc["theta"][1] += 1
        if math.log(rng.random()) < log_r:
            state.theta = prop
            if self.n:
                shape, rate = gamma_full_conditional(self.d, L, prop)
                state.gamma = np.maximum(rng.gamma(shape, 1.0 / rate), np.finfo(float).tiny)
            acc["theta"][0] += 1

    def update_V(self, state, rng, acc):
        sd = np.sqrt(np.asarray(self.config.mhProp_Vg_var))
        prop = state.V + sd * rng.standard_normal(state.V.shape)
        log_r = self.log_post_V(state, prop) - self.log_post_V(state, state.V)
        ok = np.log(rng.random(self.J)) < log_r
        state.V = np.where(ok[:, None], prop, state.V)
        acc["V"][0] += int(ok.sum())
        acc["V"][1] += self.J

    def update_SigmaV(self, state, rng, acc):
        df, scale = sigmaV_full_conditional(state.V, self.hyper.Psi_v, self.hyper.rho_v)
        S = stats.invwishart.rvs(df=df, scale=scale, random_state=rng)
        state.SigmaV = 0.5 * (S + S.T)

    def lambda_sufficient(self, state, g):
        """Per-interval event counts and frailty-weighted exposures."""
        tr = self.tr[g]
        base = state.pem[g]
        D = np.bincount(base.interval_index(tr.t_event[tr.ev_idx]), minlength=base.K + 1).astype(float)
        w = self.gamma_rows(state, g) * np.exp(self.eta(state, g))
        E = w @ base.overlap(tr.start, tr.end) if len(w) else np.zeros(base.K + 1)
        return D, E

    def update_lambda(self, state, g, rng, acc):
        base = state.pem[g]
        D, E = self.lambda_sufficient(state, g)
        step = math.sqrt(self.config.lambda_prop_var) * rng.standard_normal(base.K + 1)
        lam, prop = base.lam, base.lam + step
        log_r = (D * step - E * (np.exp(prop) - np.exp(lam))
                 - ((prop - base.mu) ** 2 - (lam - base.mu) ** 2) / (2 * base.sigma2))
        ok = np.log(rng.random(base.K + 1)) < log_r
        base.lam = np.where(ok, prop, lam)
        acc[f"lambda{g + 1}"][0] += int(ok.sum())
        acc[f"lambda{g + 1}"][1] += base.K + 1

    def update_mu(self, state, g, rng, acc):
        base = state.pem[g]
        m, v = mu_full_conditional(base.lam, base.sigma2)
        base.mu = m + math.sqrt(v) * rng.standard_normal()

    def update_sigma(self, state, g, rng, acc):
        base = state.pem[g]
        shape, rate = precision_full_conditional(base.lam, base.mu, self.hyper.PEM_sigma[g])
        base.sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate)

    def update_rj(self, state, g, rng, acc):
        base = state.pem[g]
        n_avail = len(self.available(base, g))
        pb, pd = _move_probs(base.K, n_avail, self.config.Kg_max[g])
        if pb == 0 and pd == 0:
            return
        delta = self.config.delPertg[g]
        if rng.random() < pb:
            avail = self.available(base, g)
            s_star = float(avail[rng.integers(len(avail))])
            u = 0.5 + delta * (2.0 * rng.random() - 1.0)
            key = f"birth{g + 1}"
            if not 0 < u < 1:
                acc[key][1] += 1
                return
            new, log_r = self.rj_birth_log_ratio(state, g, s_star, u)
        else:
            key = f"death{g + 1}"
            new, log_r = self.rj_death_log_ratio(state, g, int(rng.integers(base.K)))
        acc[key][1] += 1
        if math.log(rng.random()) < log_r:
            state.pem[g] = new
            acc[key][0] += 1

    def scan(self, state, rng, acc):
        """One random-scan update."""
        u = rng.random()
        total_rj = float(self.rj_prob.sum()) if self.rj_g else 0.0
        if u < total_rj:
            k = int(np.searchsorted(np.cumsum(self.rj_prob), u, side="right"))
            self.update_rj(state, self.rj_g[min(k, len(self.rj_g) - 1)], rng, acc)
            return
        kind, g = self.blocks[int(rng.integers(len(self.blocks)))]
        if g is None:
            getattr(self, f"update_{kind}")(state, rng, acc)
        else:
            getattr(self, f"update_{kind}")(state, g, rng, acc)

    def check_state(self, state):
        if self.pem:
            for g, b in enumerate(state.pem):
                b.check(self.config.Kg_max[g])
                if b.s_max != self.sg_max[g]:
                    raise AssertionError("PEM state: last split must equal sg_max")
        else:
            if not (np.all(state.alpha > 0) and np.all(state.kappa > 0)):
                raise AssertionError("Weibull parameters must stay positive")
        if self.spec.frailty and not (state.theta > 0 and np.all(state.gamma > 0)):
            raise AssertionError("frailty quantities must stay positive")

    # --- storage ------------------------------------------------------------

    def columns(self) -> list[str]:
        cols = []
        for g in range(3):
            cols += [f"beta{g + 1}[{nm}]" for nm in self.names[g]]
        for g in range(3):
            if self.pem:
                kmax = self.config.Kg_max[g]
                cols += [f"K{g + 1}", f"mu_lambda{g + 1}", f"sigma2_lambda{g + 1}"]
                cols += [f"s{g + 1}[{k}]" for k in range(1, kmax + 2)]
                cols += [f"lambda{g + 1}[{k}]" for k in range(1, kmax + 2)]
            else:
                cols += [f"alpha{g + 1}", f"kappa{g + 1}"]
        if self.spec.frailty:
            cols.append("theta")
            cols += [f"gamma[{i}]" for i in range(1, min(self.config.nGam_save, self.n) + 1)]
        if self.spec.clustered:
            if self.config.storeV:
                cols += [f"V{g + 1}[{j}]" for g in range(3) for j in range(1, self.J + 1)]
            cols += [f"SigmaV[{a},{b}]" for a in range(1, 4) for b in range(a, 4)]
        return cols

    def record(self, state) -> list[float]:
        row = []
        for g in range(3):
            row += list(state.beta[g])
        for g in range(3):
            if self.pem:
                b = state.pem[g]
                pad = self.config.Kg_max[g] + 1 - (b.K + 1)
                row += [b.K, b.mu, b.sigma2]
                row += list(b.s) + [math.nan] * pad
                row += list(b.lam) + [math.nan] * pad
            else:
                row += [state.alpha[g], state.kappa[g]]
        if self.spec.frailty:
            row.append(state.theta)
            row += list(state.gamma[: min(self.config.nGam_save, self.n)])
        if self.spec.clustered:
            if self.config.storeV:
                row += list(state.V.T.reshape(-1))
            row += [state.SigmaV[a, b] for a in range(3) for b in range(a, 3)]
        return row

    def log_hazard_grid(self, state, g, t) -> np.ndarray:
        if self.pem:
            return state.pem[g].log_hazard(t)
        a = state.alpha[g]
        return math.log(a) + math.log(state.kappa[g]) + (a - 1.0) * np.log(t)

    def acceptance_keys(self):
        keys = [f"beta{g + 1}" for g in range(3)] + ["theta", "V"]
        keys += [f"alpha{g + 1}" for g in range(3)] + [f"lambda{g + 1}" for g in range(3)]
        keys += [f"birth{g + 1}" for g in range(3)] + [f"death{g + 1}" for g in range(3)]
        return keys


def resolve_sg_max(dataset: SemiCompDataset, spec: ModelSpec, sg_max=None) -> tuple:
    """Right end of each PEM partition, defaulting to the largest event time.

    A transition without events falls back to its largest at-risk time (1 if
    there is none).  A configured value below the largest event time is a
    configuration error.
    """
    out = []
    for g, tr in enumerate(id_transitions(dataset, spec.markov)):
        ev = tr.t_event[tr.event > 0]
        largest = float(ev.max()) if len(ev) else 0.0
        if sg_max is None:
            if largest > 0:
                out.append(largest)
            else:
                out.append(float(tr.end.max()) if len(tr.end) and tr.end.max() > 0 else 1.0)
        else:
            if sg_max[g] < largest:
                raise ValueError(f"sg_max: transition {g + 1} value {sg_max[g]} is below its largest event time {largest}")
            out.append(float(sg_max[g]))
    return tuple(out)


def _moment_rate(tr) -> float:
    risk = float(np.sum(tr.end - tr.start))
    if risk <= 0:
        return 1.0
    return max(float(tr.event.sum()), 0.5) / risk


def _pem_start(tr, s_max, k_max, candidates, rng) -> PEMBaseline:
    K = min(4, k_max, len(candidates))
    splits = np.zeros(0)
    if K > 0:
        targets = s_max * np.arange(1, K + 1) / (K + 1)
        idx = np.abs(candidates[None, :] - targets[:, None]).argmin(axis=1)
        splits = np.unique(candidates[idx])
    s = np.concatenate([splits, [s_max]])
    lam = math.log(_moment_rate(tr)) + 0.1 * rng.standard_normal(len(s))
    return PEMBaseline(s, lam, float(lam.mean()), 1.0)


def init_start_values_phr(dataset: SemiCompDataset, spec: ModelSpec, hyper: PHRHyper, n_chains: int, seed: int,
                          *, sg_max=None, kg_max=(50, 50, 50), rj_scheme: int = 1) -> list[PHRState]:
    """Dispersed starting states, one per chain, reproducible from ``seed``."""
    if int(n_chains) < 1:
        raise ValueError("n_chains must be at least 1")
    viol = validate(dataset)
    if viol:
        raise PreconditionError("dataset fails validation", viol)
    trs = id_transitions(dataset, spec.markov)
    kg_max = _triple(kg_max, "Kg_max", int)
    if spec.baseline == "PEM":
        sg = resolve_sg_max(dataset, spec, None if sg_max is None else _triple(sg_max, "sg_max"))
        cands = [split_candidates(sg[g], rj_scheme, tr.t_event[tr.event > 0]) for g, tr in enumerate(trs)]
    a, b = hyper.theta
    # theta = 1/xi with xi ~ Gamma(a, b), truncated to theta in (0.1, 5)
    xi_law = stats.gamma(a, scale=1.0 / b)
    lo, hi = xi_law.cdf(0.2), xi_law.cdf(10.0)
    n = len(dataset)
    starts = []
    for c in range(int(n_chains)):
        rng = substream(seed, START_STREAM + c)
        beta = [0.1 * rng.standard_normal(tr.X.shape[1]) for tr in trs]
        st = PHRState(beta)
        if spec.baseline == "PEM":
            st.pem = [_pem_start(tr, sg[g], kg_max[g], cands[g], rng) for g, tr in enumerate(trs)]
        else:
            st.alpha = np.exp(0.1 * rng.standard_normal(3))
            st.kappa = np.array([_moment_rate(tr) for tr in trs]) * np.exp(0.1 * rng.standard_normal(3))
        if spec.frailty:
            if hi - lo > 1e-12:
                st.theta = float(1.0 / xi_law.ppf(lo + (hi - lo) * rng.random()))
            else:
                st.theta = float(rng.uniform(0.1, 5.0))
            st.theta = min(max(st.theta, 0.1), 5.0)
        st.gamma = np.ones(n)
        if spec.clustered:
            J = int(np.max(dataset.cluster)) if n else 0
            st.V = np.zeros((J, 3))
            rho = hyper.rho_v
            st.SigmaV = hyper.Psi_v / (rho - 4.0) if rho > 4 else np.array(hyper.Psi_v)
        starts.append(st)
    return starts


def _run_chain(model: PHRModel, start: PHRState, chain: int) -> tuple[dict, dict, dict]:
    cfg = model.config
    rng = substream(cfg.seed, MCMC_STREAM + chain)
    state = start.copy()
    model.check_state(state)
    acc = {k: [0, 0] for k in model.acceptance_keys()}
    stored = cfg.num_reps // cfg.thin
    burn = stored - retained_count(cfg.num_reps, cfg.thin, cfg.burnin_perc)
    cols = model.columns()
    draws = np.empty((stored - burn, len(cols)))
    grids = {}
    if cfg.time_lambda is not None:
        grids = {f"loghaz{g + 1}": np.empty((stored - burn, len(cfg.time_lambda[g]))) for g in range(3)}
        tgrid = [np.asarray(t) for t in cfg.time_lambda]
    for scan in range(1, cfg.num_reps + 1):
        model.scan(state, rng, acc)
        if cfg.debug:
            model.check_state(state)
        if scan % cfg.thin == 0:
            k = scan // cfg.thin - 1 - burn
            if k >= 0:
                draws[k] = model.record(state)
                for g in range(3) if grids else ():
                    grids[f"loghaz{g + 1}"][k] = model.log_hazard_grid(state, g, tgrid[g])
    columns = {name: draws[:, j].copy() for j, name in enumerate(cols)}
    rates = {k: {"accepted": v[0], "proposed": v[1]} for k, v in acc.items() if v[1] > 0}
    return columns, grids, rates


def mcmc_phr(dataset: SemiCompDataset, spec: ModelSpec, hyper: PHRHyper, starts: list[PHRState],
             config: MCMCConfig, threads: int = 1) -> PosteriorSamples:
    """Run ``config.n_chains`` independent chains and collect retained draws."""
    if len(starts) != config.n_chains:
        raise ValueError(f"starts: expected {config.n_chains} start states, got {len(starts)}")
    model = PHRModel(dataset, spec, hyper, config)
    for st in starts:
        if model.pem and st.pem is None or not model.pem and st.alpha is None:
            raise ValueError("starts do not match the baseline of spec")
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_chain(model, starts[c], c), range(len(starts))))
    else:
        results = [_run_chain(model, st, c) for c, st in enumerate(starts)]
    meta = {
        "sampler": "phr",
        "n_chains": len(starts),
        "n_draws": retained_count(config.num_reps, config.thin, config.burnin_perc),
        "spec": spec.to_dict(),
        "hyper": hyper.to_dict(),
        "config": config.to_dict(),
        "acceptance": [r[2] for r in results],
        "n_subjects": model.n,
    }
    if model.pem:
        meta["sg_max"] = list(model.sg_max)
        meta["padding"] = ("s<g>[k] and lambda<g>[k] are valid for k <= K<g> + 1; "
                           "later columns are NaN padding")
    if config.time_lambda is not None:
        meta["grids"] = {f"loghaz{g + 1}": list(config.time_lambda[g]) for g in range(3)}
    return PosteriorSamples([r[0] for r in results], meta, [r[1] for r in results])
