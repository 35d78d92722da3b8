import numpy as np
import pytest

from csbss.geometry import IteratePair, random_oblique
from csbss.model import ProblemInstance, SamplingOperator


def random_instance(rng, n=12, d=12, m=3, k=3, p=7, dense=False, weights=None):
    dic = rng.standard_normal((n, d))
    dic /= np.linalg.norm(dic, axis=0)
    if dense:
        ops = [SamplingOperator.dense(rng.standard_normal((p, n)) / np.sqrt(p)) for _ in range(k)]
    else:
        ops = [SamplingOperator.rows(np.sort(rng.choice(n, p, replace=False)), n) for _ in range(k)]
    obs = [rng.standard_normal(p) for _ in range(k)]
    lam = rng.uniform(0.5, 2.0, k) if weights is None else weights
    return ProblemInstance(dic, ops, obs, lam, m)


def random_iterate(rng, p, dense_x=True):
    x = rng.standard_normal((p.d, p.m))
    if not dense_x:
        x[rng.random(x.shape) < 0.4] = 0.0
    return IteratePair(x, random_oblique(p.m, p.k, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
