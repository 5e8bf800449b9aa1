"""Monte-Carlo generators for semi-competing risks and univariate survival data.

The illness-death generator follows the semi-Markov Weibull model with an
optional Gamma frailty shared by the three transitions of a subject and
optional multivariate Normal cluster effects.  Weibull variates use the
hazard-scale convention ``S(t) = exp(-kappa * exp(eta) * t**alpha)``.

Random numbers come from four independent substreams of one master seed
(cluster effects, frailties, event times, censoring times), so switching
cluster effects on or off leaves the subject-level draws untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SemiCompDataset, UnivariateDataset

__all__ = [
    "WeibullIDTruth",
    "assemble_outcomes",
    "simulate_aft_id",
    "simulate_id",
    "simulate_univariate",
    "weibull_inverse_cdf",
]


@dataclass(frozen=True)
class WeibullIDTruth:
    """True parameter values for the Weibull illness-death generator."""

    alpha: tuple
    kappa: tuple
    beta1: tuple = ()
    beta2: tuple = ()
    beta3: tuple = ()
    theta: float = 0.0
    SigmaV: np.ndarray | None = None
    cens: tuple = (0.0, 0.0)

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        kappa = tuple(float(k) for k in self.kappa)
        if len(alpha) != 3 or len(kappa) != 3:
            raise ValueError("alpha and kappa need one value per transition")
        if min(alpha) <= 0 or min(kappa) <= 0:
            raise ValueError("alpha and kappa must be positive")
        if not self.theta >= 0:
            raise ValueError("theta must be non-negative")
        cl, cu = (float(c) for c in self.cens)
        if cl < 0 or cu < cl:
            raise ValueError("cens: need 0 <= c_L <= c_U")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "cens", (cl, cu))
        for g in (1, 2, 3):
            object.__setattr__(self, f"beta{g}", tuple(float(b) for b in getattr(self, f"beta{g}")))
        if self.SigmaV is not None:
            S = np.array(self.SigmaV, dtype=float)
            if S.shape != (3, 3) or not np.allclose(S, S.T):
                raise ValueError("SigmaV must be a symmetric 3x3 matrix")
            try:
                np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                raise ValueError("SigmaV must be positive definite") from None
            S.setflags(write=False)
            object.__setattr__(self, "SigmaV", S)

    def beta(self, g: int) -> np.ndarray:
        return np.asarray(getattr(self, f"beta{g}"), dtype=float)


def weibull_inverse_cdf(u, alpha, rate):
    """Invert ``S(t) = exp(-rate * t**alpha)`` at survival probability ``u``."""
    return (-np.log(u) / rate) ** (1.0 / alpha)


def _streams(seed, k=4):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _uniform_open(rng, size):
    # (0, 1]: keeps -log(u) finite
    return 1.0 - rng.random(size)


def _linear_predictor(x, beta, n, label):
    x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] != n:
        raise ValueError(f"{label}: expected {n} rows, got {x.shape[0]}")
    if x.shape[1] != len(beta):
        raise ValueError(f"{label}: {x.shape[1]} columns but {len(beta)} coefficients")
    return x, x @ beta if len(beta) else np.zeros(n)


def _cluster_index(cluster_of, n):
    c = np.asarray(cluster_of)
    if c.shape != (n,):
        raise ValueError("clusterOf: length must match the covariate rows")
    if np.any(c < 1) or np.any(c != np.round(c)):
        raise ValueError("clusterOf: labels must be positive integers")
    return c.astype(np.int64) - 1


def assemble_outcomes(t1_star, t2_star, sojourn, c):
    """Observed ``(time1, event1, time2, event2)`` from latent times and censoring.

    The non-terminal event occurs when ``t1_star < t2_star``; the terminal
    event then follows after ``sojourn``.  Censoring at ``c`` applies to both.
    """
    t1s, t2s, soj, c = (np.asarray(v, dtype=float) for v in (t1_star, t2_star, sojourn, c))
    ill = t1s < t2s
    t1 = np.where(ill, t1s, np.inf)
    t2 = np.where(ill, t1s + soj, t2s)
    both = ill & (t2 < c)
    ill_only = ill & (t1 < c) & ~both
    death_only = ~ill & (t2 < c)
    time1 = np.where(both | ill_only, t1, np.where(death_only, t2, c))
    time2 = np.where(both | death_only, t2, c)
    return time1, (both | ill_only).astype(np.int64), time2, (both | death_only).astype(np.int64)


def simulate_id(x1, x2, x3, truth: WeibullIDTruth, seed: int, cluster_of=None,
                names=(None, None, None)) -> SemiCompDataset:
    """Simulate right-censored illness-death data from the semi-Markov Weibull model.

    Parameters
    ----------
    x1, x2, x3 : array_like or None
        Covariate matrices for the three transitions (``None`` for none).
    truth : WeibullIDTruth
        Baseline, regression, frailty, cluster-covariance and censoring values.
    seed : int
        Master seed; identical inputs and seed give bit-identical output.
    cluster_of : array_like, optional
        Cluster label in ``1..J`` per subject. Required exactly when
        ``truth.SigmaV`` is set.
    """
    n = None
    for x in (x1, x2, x3):
        if x is not None:
            n = np.asarray(x).shape[0] if n is None else n
    if n is None:
        if cluster_of is None:
            raise ValueError("cannot infer the sample size: pass covariates or cluster_of")
        n = len(cluster_of)
    X, eta = [], []
    for g, x in enumerate((x1, x2, x3), start=1):
        xg, lp = _linear_predictor(x, truth.beta(g), n, f"x{g}")
        X.append(xg)
        eta.append(lp)
    eta = np.column_stack(eta)

    if (cluster_of is None) != (truth.SigmaV is None):
        raise ValueError("cluster_of and SigmaV must be given together")

    rng_v, rng_gamma, rng_t, rng_c = _streams(seed)
    cluster = None
    if cluster_of is not None:
        idx = _cluster_index(cluster_of, n)
        J = int(idx.max()) + 1 if n else 0
        V = rng_v.multivariate_normal(np.zeros(3), truth.SigmaV, size=J, method="cholesky")
        eta = eta + V[idx]
        cluster = idx + 1

    if truth.theta > 0:
        shape = 1.0 / truth.theta
        gamma = rng_gamma.gamma(shape, 1.0 / shape, size=n)
        eta = eta + np.log(gamma)[:, None]

    alpha = np.asarray(truth.alpha)
    rate = np.asarray(truth.kappa) * np.exp(eta)
    u = _uniform_open(rng_t, (n, 3))
    t_star = weibull_inverse_cdf(u, alpha, rate)
    t1s, t2s, soj = t_star[:, 0], t_star[:, 1], t_star[:, 2]

    cl, cu = truth.cens
    c = rng_c.uniform(cl, cu, size=n) if cu > cl else np.full(n, cl)
    time1, event1, time2, event2 = assemble_outcomes(t1s, t2s, soj, c)
    return SemiCompDataset(time1, event1, time2, event2, *X, *names, cluster=cluster)


def simulate_univariate(x, alpha: float, kappa: float, beta, cens, seed: int,
                        cluster_of=None, sigmaV2: float = 0.0, names=None) -> UnivariateDataset:
    """Simulate right-censored Weibull PHR data with Normal cluster effects."""
    if alpha <= 0 or kappa <= 0:
        raise ValueError("alpha and kappa must be positive")
    if sigmaV2 < 0:
        raise ValueError("sigmaV2 must be non-negative")
    cl, cu = float(cens[0]), float(cens[1])
    if cl < 0 or cu < cl:
        raise ValueError("cens: need 0 <= c_L <= c_U")
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if x is None:
        if cluster_of is None:
            raise ValueError("cannot infer the sample size: pass x or cluster_of")
        n = len(cluster_of)
    else:
        n = np.asarray(x).shape[0]
    X, eta = _linear_predictor(x, beta, n, "x")

    rng_v, _, rng_t, rng_c = _streams(seed)
    cluster = None
    if cluster_of is not None:
        idx = _cluster_index(cluster_of, n)
        J = int(idx.max()) + 1 if n else 0
        eta = eta + rng_v.normal(0.0, np.sqrt(sigmaV2), size=J)[idx]
        cluster = idx + 1

    t = weibull_inverse_cdf(_uniform_open(rng_t, n), alpha, kappa * np.exp(eta))
    c = rng_c.uniform(cl, cu, size=n) if cu > cl else np.full(n, cl)
    event = (t < c).astype(np.int64)
    return UnivariateDataset(np.where(event == 1, t, c), event, X, names, cluster=cluster)


def simulate_aft_id(x1, x2, x3, beta, mu, sigma2, theta: float, cens, seed: int,
                    names=(None, None, None)) -> SemiCompDataset:
    """Simulate right-censored data from the log-Normal AFT illness-death model.

    Latent times ``log T_g = x_g'beta_g + gamma + eps_g`` with
    ``eps_g ~ Normal(mu_g, sigma2_g)`` and ``gamma ~ Normal(0, theta)``.  The
    non-terminal event happens when ``T_1 < T_2``; the terminal event then
    follows after a sojourn drawn from the third regression.
    """
    n = next(np.asarray(x).shape[0] for x in (x1, x2, x3) if x is not None)
    lp = []
    X = []
    for g, x in enumerate((x1, x2, x3), start=1):
        xg, eta = _linear_predictor(x, np.asarray(beta[g - 1], dtype=float), n, f"x{g}")
        X.append(xg)
        lp.append(eta)
    lp = np.column_stack(lp)
    _, rng_gamma, rng_t, rng_c = _streams(seed)
    gamma = rng_gamma.normal(0.0, np.sqrt(theta), size=n) if theta > 0 else np.zeros(n)
    eps = rng_t.standard_normal((n, 3)) * np.sqrt(np.asarray(sigma2)) + np.asarray(mu)
    logt = lp + gamma[:, None] + eps
    t1s, t2s, soj = np.exp(logt[:, 0]), np.exp(logt[:, 1]), np.exp(logt[:, 2])
    cl, cu = float(cens[0]), float(cens[1])
    c = rng_c.uniform(cl, cu, size=n) if cu > cl else np.full(n, cl)
    return SemiCompDataset(*assemble_outcomes(t1s, t2s, soj, c), *X, *names)
