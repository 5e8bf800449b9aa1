"""Maximum-likelihood fitting of Weibull proportional-hazards models.

The illness-death likelihood has three transitions with baseline hazards
``h0g(t) = alpha_g * kappa_g * t**(alpha_g - 1)``.  Transitions 1 and 2 are at
risk on ``(0, time1]``; transition 3 is at risk only after the non-terminal
event, on ``(time1, time2]`` under the Markov clock or ``(0, time2 - time1]``
under the semi-Markov clock.

With a shared Gamma(1/theta, 1/theta) frailty the frailty integrates out in
closed form.  For a subject with ``d`` observed transitions and total
covariate-weighted cumulative hazard ``L`` the marginal contribution is::

    sum(log hazards) + sum_{j<d} log(1 + j*theta) - (1/theta + d) * log1p(theta*L)

which equals ``log Gamma(1/theta + d) - log Gamma(1/theta) + d log theta``
rewritten without cancellation, so the ``theta -> 0`` limit stays accurate.

All positive parameters are optimised on the log scale.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .data import ModelSpec, PreconditionError, SemiCompDataset, UnivariateDataset, validate
from .simulate import WeibullIDTruth

log = logging.getLogger(__name__)

__all__ = [
    "FreqFit",
    "IDLikelihood",
    "PredictionCurve",
    "UnivariateLikelihood",
    "fit_freq_id",
    "fit_freq_univariate",
    "loglik_weibull_id",
    "loglik_weibull_univariate",
    "numerical_hessian",
    "predict_baseline",
]


@dataclass
class _Transition:
    rows: np.ndarray      # subject index of each at-risk row
    event: np.ndarray     # 0/1 float
    t_event: np.ndarray   # event time (1.0 where no event, unused)
    start: np.ndarray
    end: np.ndarray
    X: np.ndarray


def _transition(rows, event, t_event, start, end, X):
    event = np.asarray(event, dtype=float)
    t_event = np.where(event > 0, t_event, 1.0)
    return _Transition(np.asarray(rows), event, t_event, np.asarray(start, dtype=float),
                       np.asarray(end, dtype=float), np.asarray(X, dtype=float))


def id_transitions(dataset: SemiCompDataset, markov: bool) -> list[_Transition]:
    """Risk-set rows for the three transitions of the illness-death model."""
    n = len(dataset)
    y1, y2 = dataset.time1, dataset.time2
    d1, d2 = dataset.event1, dataset.event2
    everyone = np.arange(n)
    zeros = np.zeros(n)
    tr1 = _transition(everyone, d1, y1, zeros, y1, dataset.x1)
    tr2 = _transition(everyone, (1 - d1) * d2, y1, zeros, y1, dataset.x2)
    ill = np.flatnonzero(d1 == 1)
    if markov:
        tr3 = _transition(ill, d2[ill], y2[ill], y1[ill], y2[ill], dataset.x3[ill])
    else:
        soj = y2[ill] - y1[ill]
        tr3 = _transition(ill, d2[ill], soj, np.zeros(len(ill)), soj, dataset.x3[ill])
    return [tr1, tr2, tr3]


def _pow(t, a):
    return np.where(t > 0, np.power(np.where(t > 0, t, 1.0), a), 0.0)


def _xlogx_pow(t, a):
    # t**a * log(t), with the t -> 0 limit 0
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.power(safe, a) * np.log(safe), 0.0)


class _WeibullLikelihood:
    """Shared machinery for one- and three-transition Weibull likelihoods."""

    def __init__(self, transitions, n, frailty, block_names, covariate_names):
        self.transitions = transitions
        self.n = n
        self.frailty = frailty
        self.n_trans = len(transitions)
        d = np.zeros(n)
        for tr in transitions:
            np.add.at(d, tr.rows, tr.event)
        self.d = d
        names = []
        for g, label in enumerate(block_names):
            names += [f"log_kappa{label}", f"log_alpha{label}"]
        if frailty:
            names.append("log_theta")
        self.beta_slices = []
        for label, cov in zip(block_names, covariate_names):
            start = len(names)
            names += [f"beta{label}[{c}]" for c in cov]
            self.beta_slices.append(slice(start, len(names)))
        self.names = names
        self.theta_index = names.index("log_theta") if frailty else None

    @property
    def dim(self):
        return len(self.names)

    def _pieces(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} parameters, got {x.shape}")
        return x

    def evaluate(self, x, gradient=True):
        """Return ``(loglik, grad)`` at the log-scale parameter vector ``x``."""
        x = self._pieces(x)
        grad = np.zeros(self.dim)
        A = 0.0
        Lam = np.zeros(self.n)
        per_row = []
        for g, tr in enumerate(self.transitions):
            k, a = x[2 * g], x[2 * g + 1]
            alpha = math.exp(a)
            beta = x[self.beta_slices[g]]
            eta = tr.X @ beta if beta.size else np.zeros(len(tr.rows))
            W = _pow(tr.end, alpha) - _pow(tr.start, alpha)
            scale = math.exp(k) * np.exp(eta)
            lam = scale * W
            np.add.at(Lam, tr.rows, lam)
            logt = np.log(tr.t_event)
            A += float(np.sum(tr.event * (k + a + (alpha - 1.0) * logt + eta)))
            per_row.append((tr, alpha, scale, lam, logt))

        d = self.d
        if self.frailty:
            theta = math.exp(x[self.theta_index])
            tl = theta * Lam
            ll = A + float(np.sum(np.where(d >= 2, np.log1p(theta), 0.0)))
            ll -= float(np.sum((1.0 / theta + d) * np.log1p(tl)))
            w = -(1.0 + d * theta) / (1.0 + tl)
        else:
            ll = A - float(np.sum(Lam))
            w = -np.ones(self.n)
        if not gradient:
            return ll, None

        for g, (tr, alpha, scale, lam, logt) in enumerate(per_row):
            wr = w[tr.rows]
            grad[2 * g] = np.sum(tr.event) + np.sum(wr * lam)
            dW = alpha * (_xlogx_pow(tr.end, alpha) - _xlogx_pow(tr.start, alpha))
            grad[2 * g + 1] = np.sum(tr.event * (1.0 + alpha * logt)) + np.sum(wr * scale * dW)
            sl = self.beta_slices[g]
            if sl.stop > sl.start:
                grad[sl] = tr.X.T @ (tr.event + wr * lam)
        if self.frailty:
            extra = np.where(d >= 2, theta / (1.0 + theta), 0.0)
            grad[self.theta_index] = float(np.sum(
                extra + np.log1p(tl) / theta - (1.0 + d * theta) * Lam / (1.0 + tl)))
        return ll, grad

    def loglik(self, x) -> float:
        return self.evaluate(x, gradient=False)[0]

    def gradient(self, x) -> np.ndarray:
        return self.evaluate(x)[1]


class IDLikelihood(_WeibullLikelihood):
    """Observed-data log-likelihood of the Weibull illness-death model."""

    def __init__(self, dataset: SemiCompDataset, spec: ModelSpec):
        if spec.family != "PHR" or spec.baseline != "Weibull":
            raise ValueError("the Weibull likelihood needs family=PHR and baseline=Weibull")
        self.dataset = dataset
        self.spec = spec
        super().__init__(id_transitions(dataset, spec.markov), len(dataset), spec.frailty,
                         ("1", "2", "3"), [dataset.covariate_names(g) for g in (1, 2, 3)])

    def pack(self, truth: WeibullIDTruth) -> np.ndarray:
        """Map natural-scale parameters to the log-scale vector layout."""
        alpha = np.asarray(truth.alpha, dtype=float)
        kappa = np.asarray(truth.kappa, dtype=float)
        if np.any(alpha <= 0) or np.any(kappa <= 0):
            raise ValueError("alpha and kappa must be positive")
        x = np.zeros(self.dim)
        for g in range(3):
            x[2 * g] = math.log(kappa[g])
            x[2 * g + 1] = math.log(alpha[g])
            b = truth.beta(g + 1)
            sl = self.beta_slices[g]
            if b.size != sl.stop - sl.start:
                raise ValueError(f"beta{g + 1}: expected {sl.stop - sl.start} coefficients")
            x[sl] = b
        if self.frailty:
            if not truth.theta > 0:
                raise ValueError("theta must be positive in the frailty model")
            x[self.theta_index] = math.log(truth.theta)
        return x


class UnivariateLikelihood(_WeibullLikelihood):
    """Log-likelihood of the univariate Weibull PHR model (no frailty)."""

    def __init__(self, data: UnivariateDataset):
        n = len(data)
        tr = _transition(np.arange(n), data.event, data.time, np.zeros(n), data.time, data.x)
        self.data = data
        super().__init__([tr], n, False, ("",), [data.names])

    def pack(self, alpha, kappa, beta) -> np.ndarray:
        if alpha <= 0 or kappa <= 0:
            raise ValueError("alpha and kappa must be positive")
        return np.concatenate([[math.log(kappa), math.log(alpha)], np.asarray(beta, dtype=float)])


def loglik_weibull_id(params: WeibullIDTruth, dataset: SemiCompDataset, spec: ModelSpec) -> float:
    """Observed-data log-likelihood with the frailty integrated out analytically."""
    lik = IDLikelihood(dataset, spec)
    return lik.loglik(lik.pack(params))


def loglik_weibull_univariate(alpha, kappa, beta, data: UnivariateDataset) -> float:
    lik = UnivariateLikelihood(data)
    return lik.loglik(lik.pack(alpha, kappa, beta))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


@dataclass
class FreqFit:
    """Maximum-likelihood estimates on the log scale for positive parameters."""

    names: list
    estimates: np.ndarray
    covariance: np.ndarray | None
    loglik: float
    converged: bool
    iterations: int
    gradient_norm: float
    model: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    message: str = ""

    def __getitem__(self, name):
        return float(self.estimates[self.names.index(name)])

    @property
    def covariance_available(self) -> bool:
        return self.covariance is not None

    def std_errors(self) -> np.ndarray:
        if self.covariance is None:
            return np.full(len(self.names), np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "estimates": {k: float(v) for k, v in zip(self.names, self.estimates)},
            "covariance": None if self.covariance is None else [float(v) for v in self.covariance.ravel()],
            "covariance_available": self.covariance is not None,
            "logLik": float(self.loglik),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": float(self.gradient_norm),
            "model": self.model,
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FreqFit":
        names = list(d["names"])
        k = len(names)
        cov = d.get("covariance")
        return cls(
            names=names,
            estimates=np.array([d["estimates"][n] for n in names], dtype=float),
            covariance=None if cov is None else np.array(cov, dtype=float).reshape(k, k),
            loglik=float(d["logLik"]),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            gradient_norm=float(d.get("gradient_norm", np.nan)),
            model=d.get("model", {}),
            fixed=d.get("fixed", {}),
            message=d.get("message", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def numerical_hessian(grad_fn, x, rel_step=1e-5, abs_step=1e-5):
    """Symmetrised central-difference Jacobian of ``grad_fn`` at ``x``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    H = np.empty((k, k))
    for j in range(k):
        h = max(abs_step, rel_step * abs(x[j]))
        e = np.zeros(k)
        e[j] = h
        H[:, j] = (grad_fn(x + e) - grad_fn(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _maximise(lik: _WeibullLikelihood, x0, free, max_iter, tol):
    x_full = np.asarray(x0, dtype=float).copy()

    def expand(z):
        out = x_full.copy()
        out[free] = z
        return out

    def neg(z):
        ll, g = lik.evaluate(expand(z))
        if not np.isfinite(ll):
            return np.inf, np.zeros(z.size)
        return -ll, -g[free]

    def grad_free(z):
        return lik.gradient(expand(z))[free]

    res = optimize.minimize(neg, x_full[free], jac=True, method="BFGS",
                            options={"gtol": tol, "maxiter": max_iter})
    z = res.x
    iterations = int(res.nit)
    g = grad_free(z)

    # Newton polish: BFGS stalls on line-search precision before sup|g| < tol
    # on large datasets.
    for _ in range(50):
        if np.max(np.abs(g), initial=0.0) < tol or iterations >= max_iter:
            break
        H = numerical_hessian(grad_free, z)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            break
        ll0 = -neg(z)[0]
        t = 1.0
        while t > 1e-8:
            cand = z + t * step
            if -neg(cand)[0] >= ll0 - 1e-12 * abs(ll0):
                break
            t *= 0.5
        else:
            break
        z = cand
        g = grad_free(z)
        iterations += 1
    return expand(z), iterations, str(res.message)


def _fit(lik, x0, fixed, max_iter, tol, model):
    fixed = dict(fixed or {})
    for name in fixed:
        if name not in lik.names:
            raise ValueError(f"fixed: unknown parameter {name!r}")
        x0[lik.names.index(name)] = float(fixed[name])
    free = np.array([i for i, nm in enumerate(lik.names) if nm not in fixed], dtype=int)
    x, iterations, message = _maximise(lik, x0, free, max_iter, tol)
    ll, grad = lik.evaluate(x)
    gnorm = float(np.max(np.abs(grad[free]), initial=0.0))
    converged = gnorm < tol

    cov = None
    k = len(lik.names)
    try:
        Hf = numerical_hessian(lambda z: lik.gradient(_insert(x, free, z))[free], x[free])
        info = -Hf
        np.linalg.cholesky(info)
        cov_free = np.linalg.inv(info)
        cov = np.zeros((k, k))
        cov[np.ix_(free, free)] = 0.5 * (cov_free + cov_free.T)
    except np.linalg.LinAlgError:
        log.warning("observed information is singular or not positive definite; covariance unavailable")
        cov = None
    if not converged:
        log.warning("optimizer stopped with gradient sup-norm %.3g >= tol %.3g", gnorm, tol)
    return FreqFit(list(lik.names), x, cov, ll, converged, iterations, gnorm, model, fixed, message)


def _insert(x, free, z):
    out = np.array(x, dtype=float)
    out[free] = z
    return out


def _check_events(lik, fixed):
    fixed = fixed or {}
    for g, tr in enumerate(lik.transitions):
        label = lik.names[2 * g][len("log_kappa"):]
        own = [nm for nm in lik.names if nm.endswith(label) and nm.startswith(("log_kappa", "log_alpha"))]
        own += lik.names[lik.beta_slices[g]]
        if any(nm not in fixed for nm in own) and tr.event.sum() == 0:
            raise PreconditionError(f"transition {label or 1}: no observed events, parameters not identifiable")


def fit_freq_id(dataset: SemiCompDataset, spec: ModelSpec, max_iter: int = 500, tol: float = 1e-8,
                fixed: dict | None = None) -> FreqFit:
    """Maximum-likelihood fit of the Weibull illness-death model.

    Parameters
    ----------
    dataset : SemiCompDataset
        Validated right-censored records.
    spec : ModelSpec
        ``h3`` and ``frailty`` select the likelihood.
    max_iter, tol : int, float
        Iteration cap and gradient sup-norm threshold for convergence.
    fixed : dict, optional
        Parameters held at given log-scale values, e.g. ``{"log_alpha1": 0.0}``
        for an exponential transition-1 baseline.
    """
    bad = validate(dataset)
    if bad:
        raise PreconditionError(f"{len(bad)} invalid records; first: {bad[0]}", bad)
    lik = IDLikelihood(dataset, spec)
    _check_events(lik, fixed)
    x0 = np.zeros(lik.dim)
    for g, tr in enumerate(lik.transitions):
        events = tr.event.sum()
        risk = float(np.sum(tr.end - tr.start))
        x0[2 * g] = math.log(max(events, 0.5) / risk) if risk > 0 else 0.0
    if lik.frailty:
        x0[lik.theta_index] = math.log(0.5)
    model = {"analysis": "illness-death", "h3": spec.h3, "frailty": spec.frailty,
             "covariates": {f"x{g}": list(dataset.covariate_names(g)) for g in (1, 2, 3)}}
    return _fit(lik, x0, fixed, max_iter, tol, model)


def fit_freq_univariate(data: UnivariateDataset, max_iter: int = 500, tol: float = 1e-8,
                        fixed: dict | None = None) -> FreqFit:
    """Maximum-likelihood fit of the univariate Weibull PHR model."""
    if len(data) == 0 or np.any(data.time < 0) or not np.all(np.isin(data.event, (0, 1))):
        raise PreconditionError("univariate data need non-negative times and 0/1 events")
    lik = UnivariateLikelihood(data)
    if data.event.sum() == 0:
        raise PreconditionError("no observed events: parameters not identifiable")
    if np.any((data.event == 1) & (data.time <= 0)):
        raise PreconditionError("observed events need positive times")
    x0 = np.zeros(lik.dim)
    x0[0] = math.log(data.event.sum() / data.time.sum())
    model = {"analysis": "univariate", "covariates": {"x": list(data.names)}}
    return _fit(lik, x0, fixed, max_iter, tol, model)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


@dataclass
class PredictionCurve:
    transition: int | None
    kind: str
    times: np.ndarray
    point: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @property
    def has_intervals(self) -> bool:
        return self.lower is not None


def _transition_labels(fit: FreqFit):
    return [nm[len("log_kappa"):] for nm in fit.names if nm.startswith("log_kappa")]


def predict_baseline(fit: FreqFit, tgrid, level: float = 0.95, x_new: dict | None = None) -> list[PredictionCurve]:
    """Survival and hazard curves per transition with log-scale delta-method bands.

    ``x_new`` optionally maps transition label (``"1"``, ``"2"``, ``"3"`` or
    ``""`` for univariate fits) to a covariate row; the default is the
    baseline (all covariates zero).  The hazard band is built on ``log h`` and
    the survival band on ``log(-log S)``.
    """
    t = np.asarray(tgrid, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("tgrid must be a non-negative increasing grid")
    if not fit.converged:
        raise ValueError("prediction needs a converged fit")
    z = stats.norm.ppf(0.5 + level / 2.0)
    cov = fit.covariance
    x_new = x_new or {}
    curves = []
    pos = t > 0
    logt = np.log(np.where(pos, t, 1.0))
    for label in _transition_labels(fit):
        ik = fit.names.index(f"log_kappa{label}")
        ia = fit.names.index(f"log_alpha{label}")
        k, a = fit.estimates[ik], fit.estimates[ia]
        alpha = math.exp(a)
        bidx = [i for i, nm in enumerate(fit.names) if nm.startswith(f"beta{label}[")]
        xrow = np.asarray(x_new.get(label, np.zeros(len(bidx))), dtype=float)
        if xrow.size != len(bidx):
            raise ValueError(f"x_new[{label!r}]: expected {len(bidx)} covariates")
        lp = float(xrow @ fit.estimates[bidx]) if bidx else 0.0
        idx = [ik, ia] + bidx

        log_h = k + a + (alpha - 1.0) * logt + lp
        log_H = k + alpha * logt + lp
        h = np.exp(log_h)
        S = np.where(pos, np.exp(-np.exp(log_H)), 1.0)
        if not np.all(pos):
            # hazard limit at t = 0 depends on the shape
            h0 = 0.0 if alpha > 1 else (math.exp(k + lp) if alpha == 1 else np.inf)
            h = np.where(pos, h, h0)

        lab = int(label) if label else None
        if cov is None:
            curves.append(PredictionCurve(lab, "Surv", t, S))
            curves.append(PredictionCurve(lab, "Haz", t, h))
            continue
        C = cov[np.ix_(idx, idx)]
        J_h = np.column_stack([np.ones_like(t), 1.0 + alpha * logt] + [np.full_like(t, v) for v in xrow])
        J_H = np.column_stack([np.ones_like(t), alpha * logt] + [np.full_like(t, v) for v in xrow])
        se_h = np.sqrt(np.einsum("ti,ij,tj->t", J_h, C, J_h))
        se_H = np.sqrt(np.einsum("ti,ij,tj->t", J_H, C, J_H))
        S_lo = np.where(pos, np.exp(-np.exp(log_H + z * se_H)), 1.0)
        S_hi = np.where(pos, np.exp(-np.exp(log_H - z * se_H)), 1.0)
        h_lo = np.where(pos, np.exp(log_h - z * se_h), h)
        h_hi = np.where(pos, np.exp(log_h + z * se_h), h)
        curves.append(PredictionCurve(lab, "Surv", t, S, S_lo, S_hi))
        curves.append(PredictionCurve(lab, "Haz", t, h, h_lo, h_hi))
    return curves
