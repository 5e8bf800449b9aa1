"""Piecewise-exponential baselines and the reversible-jump partition moves.

A baseline is described by split points ``s_1 < ... < s_K < s_{K+1} = s_max``
and log-hazard heights ``lambda_1..lambda_{K+1}``; the hazard is
``exp(lambda_k)`` on ``(s_{k-1}, s_k]`` with ``s_0 = 0``.  Times beyond
``s_max`` keep the last height.

The split locations given ``K`` follow the even-numbered order statistics of
``2K + 1`` uniforms on ``(0, s_max)``, and ``K`` itself is Poisson.  Birth
moves split one interval at ``s*`` and perturb its height so that the
length-weighted mean of the two new heights equals the old one; death moves
merge two neighbouring intervals by the inverse map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "PEMBaseline",
    "birth_split",
    "death_merge",
    "log_split_prior",
    "candidate_cells",
    "split_candidates",
]


@dataclass
class PEMBaseline:
    """Mutable PEM state for one transition."""

    s: np.ndarray          # split points, last element = s_max
    lam: np.ndarray        # log-hazard heights, len(s)
    mu: float = 0.0
    sigma2: float = 1.0

    @property
    def K(self) -> int:
        return len(self.s) - 1

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def copy(self) -> "PEMBaseline":
        return PEMBaseline(self.s.copy(), self.lam.copy(), self.mu, self.sigma2)

    def check(self, k_max: int | None = None):
        if len(self.lam) != len(self.s):
            raise AssertionError("PEM state: need K+1 heights for K+1 intervals")
        if len(self.s) < 1 or np.any(np.diff(self.s) <= 0) or self.s[0] <= 0:
            raise AssertionError("PEM state: split points must be positive and strictly increasing")
        if k_max is not None and self.K > k_max:
            raise AssertionError("PEM state: K exceeds K_max")
        if not self.sigma2 > 0:
            raise AssertionError("PEM state: sigma2 must be positive")

    def interval_index(self, t) -> np.ndarray:
        """0-based interval containing each ``t`` (intervals are right-closed)."""
        return np.minimum(np.searchsorted(self.s, t, side="left"), self.K)

    def log_hazard(self, t) -> np.ndarray:
        return self.lam[self.interval_index(t)]

    def cum_hazard(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lower = np.concatenate([[0.0], self.s[:-1]])
        h = np.exp(self.lam)
        # cum[k] = integral up to the start of interval k
        cum = np.concatenate([[0.0], np.cumsum(h[:-1] * (self.s[:-1] - lower[:-1]))])
        k = self.interval_index(t)
        return cum[k] + h[k] * (t - lower[k])

    def overlap(self, start, end) -> np.ndarray:
        """Length of ``(start, end]`` inside each interval; shape ``(n, K+1)``."""
        lower = np.concatenate([[0.0], self.s[:-1]])
        upper = np.concatenate([self.s[:-1], [np.inf]])
        lo = np.maximum(start[:, None], lower[None, :])
        hi = np.minimum(end[:, None], upper[None, :])
        return np.clip(hi - lo, 0.0, None)

    def log_prior_heights(self) -> float:
        r = self.lam - self.mu
        return float(-0.5 * len(r) * math.log(2 * math.pi * self.sigma2) - 0.5 * np.dot(r, r) / self.sigma2)


def log_split_prior(s, s_max: float | None = None) -> float:
    """Log density of split locations ``s`` (last element ``s_max``) given ``K``.

    ``(2K+1)! * prod(s_k - s_{k-1}) / s_max**(2K+1)`` over the ``K+1`` gaps.
    """
    s = np.asarray(s, dtype=float)
    if s_max is None:
        s_max = float(s[-1])
    K = len(s) - 1
    gaps = np.diff(np.concatenate([[0.0], s]))
    if np.any(gaps <= 0):
        return -np.inf
    return float(gammaln(2 * K + 2) + np.sum(np.log(gaps)) - (2 * K + 1) * math.log(s_max))


def split_candidates(s_max: float, rj_scheme: int, event_times=None) -> np.ndarray:
    """Admissible birth locations strictly inside ``(0, s_max)``.

    Scheme 1 uses the integer grid ``1, 2, ...``; scheme 2 the distinct
    observed event times of the transition.
    """
    if rj_scheme == 1:
        grid = np.arange(1.0, math.ceil(s_max))
    elif rj_scheme == 2:
        grid = np.unique(np.asarray(event_times, dtype=float)) if event_times is not None else np.zeros(0)
    else:
        raise ValueError("rj_scheme must be 1 or 2")
    return grid[(grid > 0) & (grid < s_max)]


def candidate_cells(candidates, s_max: float) -> np.ndarray:
    """Width of the cell each candidate represents inside ``(0, s_max)``.

    Cells run between midpoints of neighbouring candidates, so they tile
    ``(0, s_max)``.  Drawing a candidate uniformly and treating it as a point
    spread over its cell turns the discrete birth proposal into a density,
    which keeps the chain consistent with the continuous location prior.
    """
    c = np.asarray(candidates, dtype=float)
    if len(c) == 0:
        return np.zeros(0)
    mid = (c[1:] + c[:-1]) / 2.0
    edges = np.concatenate([[0.0], mid, [s_max]])
    return np.diff(edges)


def _weights(s_left, s_star, s_right):
    width = s_right - s_left
    return (s_star - s_left) / width, (s_right - s_star) / width


def birth_split(base: PEMBaseline, s_star: float, u: float) -> tuple[PEMBaseline, dict]:
    """Insert a split at ``s_star`` with perturbation ``u`` in (0, 1).

    Returns the proposed state and the quantities needed by the acceptance
    ratio (``log_jacobian``, ``log_split_prior_ratio``, interval index).
    """
    k = int(np.searchsorted(base.s, s_star, side="left"))
    if k > base.K or base.s[k] == s_star:
        raise ValueError("s_star must fall strictly inside an interval")
    s_left = 0.0 if k == 0 else float(base.s[k - 1])
    s_right = float(base.s[k])
    w1, w2 = _weights(s_left, s_star, s_right)
    D = math.log((1.0 - u) / u)
    lam_old = base.lam[k]
    lam1 = lam_old - w2 * D
    lam2 = lam_old + w1 * D
    new = PEMBaseline(np.insert(base.s, k, s_star),
                      np.concatenate([base.lam[:k], [lam1, lam2], base.lam[k + 1:]]),
                      base.mu, base.sigma2)
    K = base.K
    log_prior_s = (math.log((2 * K + 3) * (2 * K + 2))
                   + math.log((s_star - s_left) * (s_right - s_star) / (s_right - s_left))
                   - 2 * math.log(base.s_max))
    info = {"index": k, "u": u, "log_jacobian": -math.log(u * (1.0 - u)),
            "log_split_prior_ratio": log_prior_s}
    return new, info


def death_merge(base: PEMBaseline, j: int) -> tuple[PEMBaseline, dict]:
    """Remove interior split ``s_j`` (0-based, ``j < K``), merging its two intervals.

    ``info["u"]`` is the perturbation the matching birth would have needed.
    """
    if not 0 <= j < base.K:
        raise ValueError("j must index an interior split")
    s_left = 0.0 if j == 0 else float(base.s[j - 1])
    s_star = float(base.s[j])
    s_right = float(base.s[j + 1])
    w1, w2 = _weights(s_left, s_star, s_right)
    lam1, lam2 = base.lam[j], base.lam[j + 1]
    lam_old = w1 * lam1 + w2 * lam2
    u = 1.0 / (1.0 + math.exp(lam2 - lam1))
    new = PEMBaseline(np.delete(base.s, j), np.concatenate([base.lam[:j], [lam_old], base.lam[j + 2:]]),
                      base.mu, base.sigma2)
    K = new.K
    log_prior_s = (math.log((2 * K + 3) * (2 * K + 2))
                   + math.log((s_star - s_left) * (s_right - s_star) / (s_right - s_left))
                   - 2 * math.log(base.s_max))
    info = {"index": j, "u": u, "s_star": s_star,
            "log_jacobian": -math.log(u * (1.0 - u)) if 0 < u < 1 else np.inf,
            "log_split_prior_ratio": log_prior_s}
    return new, info
