import math

import numpy as np
import pytest

from semicomp.data import SemiCompDataset
from semicomp.simulate import WeibullIDTruth, simulate_id

ACCEPTANCE_LINES = []


def random_truth(rng, p=(1, 1, 1), theta=None):
    return WeibullIDTruth(
        alpha=tuple(rng.uniform(0.7, 1.4, 3)),
        kappa=tuple(rng.uniform(0.05, 0.3, 3)),
        beta1=tuple(rng.normal(0, 0.5, p[0])),
        beta2=tuple(rng.normal(0, 0.5, p[1])),
        beta3=tuple(rng.normal(0, 0.5, p[2])),
        theta=float(rng.uniform(0.2, 1.5)) if theta is None else theta,
        cens=(2.0, 8.0),
    )


def random_id_dataset(n, seed, p=(1, 1, 1)):
    """Simulated illness-death data with random truth and Normal covariates."""
    rng = np.random.default_rng(seed)
    X = [rng.normal(size=(n, k)) for k in p]
    truth = random_truth(rng, p)
    return simulate_id(*X, truth, seed)


def empty_dataset():
    e = np.zeros(0)
    return SemiCompDataset(e, e.astype(int), e, e.astype(int))


def subject_conditional_loglik(row, truth, gamma, markov):
    """Log-likelihood of one record given its frailty, from the hazards directly."""
    t1, d1, t2, d2, x1, x2, x3 = row
    a, k = truth.alpha, truth.kappa
    lp = [float(np.dot(x, truth.beta(g + 1))) for g, x in enumerate((x1, x2, x3))]

    def h(g, t):
        return gamma * k[g] * math.exp(lp[g]) * a[g] * t ** (a[g] - 1)

    def H(g, t):
        return gamma * k[g] * math.exp(lp[g]) * t ** a[g]

    ll = -H(0, t1) - H(1, t1)
    if d1:
        ll += math.log(h(0, t1))
        if markov:
            ll -= H(2, t2) - H(2, t1)
            if d2:
                ll += math.log(h(2, t2))
        else:
            ll -= H(2, t2 - t1)
            if d2:
                ll += math.log(h(2, t2 - t1))
    elif d2:
        ll += math.log(h(1, t2))
    return ll


def dataset_rows(ds):
    for i in range(len(ds)):
        yield (ds.time1[i], ds.event1[i], ds.time2[i], ds.event2[i], ds.x1[i], ds.x2[i], ds.x3[i])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the summary."""

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit
