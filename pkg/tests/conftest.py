import sys

import numpy as np
import pytest

from potgcl.autodiff import Tape, Tensor
from potgcl.encoder import init_encoder
from potgcl.graph import Graph


def numeric_grad(fn, arr, h=1e-4):
    """Central finite differences of scalar ``fn()`` w.r.t. ``arr`` (mutated in place)."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = arr[idx]
        arr[idx] = old + h
        up = fn()
        arr[idx] = old - h
        down = fn()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def rel_error(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)


def analytic_grad(build, leaves):
    for t in leaves:
        t.grad = None
    with Tape() as tape:
        loss = build()
    tape.backward(loss)
    return [np.zeros_like(t.values) if t.grad is None else t.grad for t in leaves]


def random_graph_instance(rng, max_nodes=8, max_edges=12, max_dim=4):
    n = int(rng.integers(2, max_nodes + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    pick = rng.choice(len(pairs), m, replace=False)
    F = int(rng.integers(1, max_dim + 1))
    return Graph(n, np.array([pairs[k] for k in pick]), rng.normal(size=(n, F)))


def random_encoder(rng, F, max_dim=4, gamma=None):
    d1 = int(rng.integers(1, max_dim + 1))
    d2 = int(rng.integers(1, max_dim + 1))
    gamma = float(rng.choice([0.0, 0.1, 0.25, 0.5])) if gamma is None else gamma
    p = init_encoder(F, d1, d2, gamma=gamma, rng=rng)
    for t in p.tensors():
        t.values[:] = rng.normal(size=t.shape)
    return p


@pytest.fixture
def path4():
    rng = np.random.default_rng(0)
    return Graph(4, [(0, 1), (1, 2), (2, 3)], rng.normal(size=(4, 3)))


@pytest.fixture
def leaf():
    def make(values):
        return Tensor(np.asarray(values, dtype=float), requires_grad=True)

    return make


class PairedRuns:
    """Lazily trained (baseline, POT) pairs on the SBM fixture, one per seed."""

    def __init__(self):
        from potgcl.synthetic import sbm_graph

        self.graph = sbm_graph(seed=0)
        self._runs = {}

    def config(self, seed):
        from potgcl.trainer import TrainConfig

        return TrainConfig(seed=seed)

    def __call__(self, seed):
        from potgcl.studies import paired_runs

        if seed not in self._runs:
            self._runs[seed] = paired_runs(self.graph, self.config(seed))
        return self._runs[seed]


@pytest.fixture(scope="session")
def sbm_runs():
    return PairedRuns()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in mod.SUMMARY:
            terminalreporter.write_line(line)
