import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from syncsim.errors import ContractViolation
from syncsim.topology import (
    TopologyGraph,
    complete_graph,
    drop_k_policy,
    max_edges,
    mh_mixing_matrix,
    random_c_policy,
    random_subgraph,
    second_largest_eigenvalue_modulus,
    static_policy,
)


@st.composite
def graphs(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return TopologyGraph(n, frozenset(p for p, m in zip(pairs, mask) if m))


def assert_mixing_invariants(g, w):
    assert np.array_equal(w, w.T)
    assert np.allclose(w.sum(axis=0), 1.0, atol=1e-12)
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(w >= 0)
    off = ~np.eye(g.n, dtype=bool)
    assert np.array_equal(w[off] > 0, g.adjacency()[off] > 0)


@settings(max_examples=200)
@given(graphs())
def test_mixing_matrix_invariants(g):
    assert_mixing_invariants(g, mh_mixing_matrix(g))


def test_mixing_matrix_thousand_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        g = random_subgraph(n, int(rng.integers(1, max_edges(n) + 1)), rng)
        assert_mixing_invariants(g, mh_mixing_matrix(g))


def test_complete_graph_weights():
    w = mh_mixing_matrix(complete_graph(6))
    assert np.allclose(w, 1 / 6)
    assert second_largest_eigenvalue_modulus(w) == pytest.approx(0.0, abs=1e-12)


def test_path_graph_weights():
    g = TopologyGraph.from_edges(3, [(0, 1), (1, 2)])
    w = mh_mixing_matrix(g)
    assert np.allclose(w, [[2 / 3, 1 / 3, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 3, 2 / 3]])


def test_isolated_node_keeps_its_value():
    w = mh_mixing_matrix(TopologyGraph.from_edges(3, [(0, 1)]))
    assert w[2, 2] == 1.0


def test_canonicalization_and_validation():
    g = TopologyGraph.from_edges(4, [(2, 1), (1, 2), (3, 0)])
    assert g.sorted_edges() == [(0, 3), (1, 2)]
    assert not g.is_connected()
    with pytest.raises(ContractViolation):
        TopologyGraph.from_edges(3, [(1, 1)])
    with pytest.raises(ContractViolation):
        TopologyGraph.from_edges(3, [(0, 3)])


def test_random_subgraph_edge_count_and_bounds(rng):
    for c in (1, 7, 15):
        assert len(random_subgraph(6, c, rng).edges) == c
    with pytest.raises(ContractViolation):
        random_subgraph(6, 16, rng)
    with pytest.raises(ContractViolation):
        random_subgraph(6, 0, rng)


def test_policies(rng):
    full = complete_graph(6)
    assert static_policy(full)(5) is full
    assert random_c_policy(6, 15, rng)(3) == full
    pol = random_c_policy(6, 4, rng)
    seen = {pol(k).edges for k in range(20)}
    assert len(seen) > 1 and all(len(e) == 4 for e in seen)
    assert len(drop_k_policy(6, 3, rng)(1).edges) == 12


def test_spectral_gap_orders_sparse_below_dense():
    ring = TopologyGraph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)])
    slem_ring = second_largest_eigenvalue_modulus(mh_mixing_matrix(ring))
    assert 0 < slem_ring < 1
    assert slem_ring > second_largest_eigenvalue_modulus(mh_mixing_matrix(complete_graph(6)))


@pytest.mark.parametrize("n, count", [(6, 15), (2, 1), (4, 6)])
def test_max_edges(n, count):
    assert max_edges(n) == count


def test_single_random_edge(rng):
    g = random_subgraph(6, 1, rng)
    (i, j), = g.edges
    assert 0 <= i < j < 6


def test_drop_one_is_uniform(rng):
    everything = {(i, j) for i in range(6) for j in range(i + 1, 6)}
    counts = {e: 0 for e in everything}
    for _ in range(10000):
        (missing,) = everything - random_subgraph(6, 14, rng).edges
        counts[missing] += 1
    freq = np.array(list(counts.values())) / 10000
    assert np.all(np.abs(freq - 1 / 15) < 0.01)


def test_single_edge_weights_in_six_nodes():
    w = mh_mixing_matrix(TopologyGraph.from_edges(6, [(0, 1)]))
    assert w[0, 1] == w[1, 0] == w[0, 0] == w[1, 1] == 0.5
    assert np.all(np.diag(w)[2:] == 1.0)


def test_star_weights():
    w = mh_mixing_matrix(TopologyGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)]))
    assert np.allclose(w[0], 0.25)
    assert np.allclose(np.diag(w)[1:], 0.75)


@settings(max_examples=100)
@given(graphs())
def test_connected_graphs_contract(g):
    if g.is_connected():
        assert second_largest_eigenvalue_modulus(mh_mixing_matrix(g)) < 1 - 1e-9
