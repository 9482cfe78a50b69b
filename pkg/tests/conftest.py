import numpy as np
import pytest
from hypothesis import strategies as st

from sfgt.graphs import Graph


def er_graph(rng: np.random.Generator, n: int, p: float, ensure_degree: bool = False) -> Graph:
    """Seeded Erdos-Renyi graph; optionally patch isolated nodes by wiring
    them to a random other node (needs n >= 2)."""
    edges = {(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
    if ensure_degree and n >= 2:
        deg = [0] * n
        for i, j in edges:
            deg[i] += 1
            deg[j] += 1
        for i in range(n):
            if deg[i] == 0:
                j = int(rng.integers(0, n - 1))
                j = j if j < i else j + 1
                edges.add((min(i, j), max(i, j)))
                deg[i] += 1
                deg[j] += 1
    return Graph(n=n, edges=frozenset(edges))


@st.composite
def graphs(draw, n_max: int = 10, feature_dims=(0, 1, 3)):
    n = draw(st.integers(min_value=1, max_value=n_max))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if pairs:
        edges = draw(st.sets(st.sampled_from(pairs)))
    else:
        edges = set()
    d = draw(st.sampled_from(list(feature_dims)))
    features = None
    if d:
        values = draw(
            st.lists(
                st.floats(min_value=-10, max_value=10, allow_nan=False, width=64),
                min_size=n * d,
                max_size=n * d,
            )
        )
        features = np.array(values, dtype=np.float64).reshape(n, d)
    return Graph(n=n, edges=frozenset(edges), features=features)


@pytest.fixture
def k2() -> Graph:
    return Graph(n=2, edges=frozenset({(0, 1)}))


@pytest.fixture
def p3() -> Graph:
    return Graph(n=3, edges=frozenset({(0, 1), (1, 2)}))
