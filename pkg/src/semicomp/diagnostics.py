"""Convergence diagnostics, posterior summaries and Bayesian baseline curves."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .freq import PredictionCurve
from .pem import PEMBaseline
from .samples import PosteriorSamples

__all__ = [
    "SummaryRow",
    "SummaryTable",
    "bayes_baseline_curves",
    "psrf",
    "summarize_posterior",
]


def psrf(chains) -> float:
    """Potential scale reduction factor of ``m >= 2`` equal-length chains.

    Uses the classic between/within variance comparison without splitting.
    Returns 1 when every chain is constant at the same value and ``inf`` when
    the chains are constant at different values.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("psrf needs at least 2 chains of at least 2 draws")
    n = x.shape[1]
    means = x.mean(axis=1)
    W = float(np.mean(x.var(axis=1, ddof=1)))
    B = n * float(np.var(means, ddof=1))
    if W == 0.0:
        return 1.0 if B == 0.0 else math.inf
    V = (n - 1) / n * W + B / n
    return math.sqrt(V / W)


@dataclass(frozen=True)
class SummaryRow:
    name: str
    point: float
    lower: float
    upper: float
    psrf: float | None = None
    exp_point: float | None = None
    exp_lower: float | None = None
    exp_upper: float | None = None


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple
    level: float
    n_chains: int
    n_draws: int

    def __getitem__(self, name) -> SummaryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def has_psrf(self) -> bool:
        return self.n_chains >= 2

    def to_text(self) -> str:
        lo = f"{100 * (1 - self.level) / 2:g}%"
        hi = f"{100 * (1 + self.level) / 2:g}%"
        width = max([len(r.name) for r in self.rows] + [9])
        head = ["PM", lo, hi] + (["PSRF"] if self.has_psrf else [])
        lines = [f"{self.n_chains} chain(s), {self.n_draws} retained draws each", ""]
        lines.append(" " * width + "".join(f"{h:>12}" for h in head))
        for r in self.rows:
            vals = [r.point, r.lower, r.upper] + ([r.psrf] if self.has_psrf else [])
            lines.append(f"{r.name:<{width}}" + "".join(f"{v:>12.4g}" for v in vals))
        coef = [r for r in self.rows if r.exp_point is not None]
        if coef:
            lines += ["", " " * width + "".join(f"{h:>12}" for h in ["exp(PM)", lo, hi])]
            for r in coef:
                lines.append(f"{r.name:<{width}}" + "".join(f"{v:>12.4g}" for v in (r.exp_point, r.exp_lower, r.exp_upper)))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "point", "lower", "upper", "psrf", "exp_point", "exp_lower", "exp_upper"])
        for r in self.rows:
            vals = [r.point, r.lower, r.upper, r.psrf, r.exp_point, r.exp_lower, r.exp_upper]
            w.writerow([r.name] + ["" if v is None else repr(float(v)) for v in vals])
        return buf.getvalue()


def _summarised(name: str) -> bool:
    # variable-dimension and per-subject columns are left out of the table
    base = name.split("[")[0]
    if "[" in name and (base.startswith(("s", "lambda", "gamma", "V", "y1", "y2", "status"))):
        return False
    return True


def summarize_posterior(samples: PosteriorSamples, level: float = 0.95, names=None) -> SummaryTable:
    """Median and central ``level`` interval of each parameter, pooled over chains."""
    if samples.n_chains == 0 or samples.n_draws == 0:
        raise ValueError("samples: no retained draws")
    if samples.n_draws < 2:
        raise ValueError("samples: need at least 2 retained draws")
    if names is None:
        names = [nm for nm in samples.names if _summarised(nm)]
    q = [(1 - level) / 2, 0.5, (1 + level) / 2]
    m = samples.n_chains
    if m < 2:
        warnings.warn("PSRF needs at least 2 chains; reporting the summary without it", stacklevel=2)
    rows = []
    for nm in names:
        pooled = samples.pooled(nm)
        lo, med, hi = (float(v) for v in np.quantile(pooled, q))
        r = psrf(samples.column(nm)) if m >= 2 else None
        if nm.startswith("beta"):
            rows.append(SummaryRow(nm, med, lo, hi, r, math.exp(med), math.exp(lo), math.exp(hi)))
        else:
            rows.append(SummaryRow(nm, med, lo, hi, r))
    return SummaryTable(tuple(rows), level, m, samples.n_draws)


def _pem_draw(columns: dict, g: int, i: int, s_max: float) -> PEMBaseline:
    K = int(columns[f"K{g}"][i])
    s = np.array([columns[f"s{g}[{k}]"][i] for k in range(1, K + 2)])
    lam = np.array([columns[f"lambda{g}[{k}]"][i] for k in range(1, K + 2)])
    return PEMBaseline(s, lam)


def bayes_baseline_curves(samples: PosteriorSamples, tgrid, level: float = 0.95, kind: str = "Surv") -> list[PredictionCurve]:
    """Pointwise posterior median and band of each baseline hazard or survival."""
    if kind not in ("Surv", "Haz"):
        raise ValueError("kind must be 'Surv' or 'Haz'")
    t = np.asarray(tgrid, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("tgrid must be a non-negative increasing grid")
    names = samples.names
    pem = "K1" in names
    if not pem and "alpha1" not in names:
        raise ValueError("samples do not come from a Weibull or PEM PHR fit")
    q = [(1 - level) / 2, 0.5, (1 + level) / 2]
    curves = []
    for g in (1, 2, 3):
        if pem:
            s_max = samples.meta["sg_max"][g - 1]
            if t.size and t[-1] > s_max:
                raise ValueError(f"tgrid exceeds sg_max = {s_max} for transition {g}")
            rows = []
            for chain in samples.chains:
                for i in range(len(chain[f"K{g}"])):
                    b = _pem_draw(chain, g, i, s_max)
                    rows.append(np.exp(b.log_hazard(t)) if kind == "Haz" else np.exp(-b.cum_hazard(t)))
            vals = np.array(rows).reshape(-1, t.size)
        else:
            a = samples.pooled(f"alpha{g}")[:, None]
            k = samples.pooled(f"kappa{g}")[:, None]
            with np.errstate(divide="ignore"):
                vals = a * k * np.power(t[None, :], a - 1) if kind == "Haz" else np.exp(-k * np.power(t[None, :], a))
        lo, med, hi = np.quantile(vals, q, axis=0)
        curves.append(PredictionCurve(g, kind, t, med, lo, hi))
    return curves
