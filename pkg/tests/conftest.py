import numpy as np
import pytest

from normforge import Euclidean, GraphEdge, Linear, SumNorm


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def l1_norm(n: int) -> SumNorm:
    return SumNorm(n, 1.0, tuple(Linear(np.eye(n)[i]) for i in range(n)))


def l2_norm(n: int) -> SumNorm:
    return SumNorm(n, 2.0, tuple(Linear(np.eye(n)[i]) for i in range(n)))


def euclid_norm(n: int, t: float = 1.0) -> SumNorm:
    return SumNorm(n, 1.0, (Euclidean(t),))


def graph_norm(n: int, edges, p: float = 1.0) -> SumNorm:
    return SumNorm(n, p, tuple(GraphEdge(u, v, c) for u, v, c in edges))


def complete_graph_edges(n: int):
    return [(u, v, 1.0) for u in range(n) for v in range(u + 1, n)]


def random_linear_norm(m: int, n: int, seed: int, p: float = 2.0) -> SumNorm:
    g = np.random.default_rng(seed)
    A = g.standard_normal((m, n))
    return SumNorm(n, p, tuple(Linear(a) for a in A)), A
