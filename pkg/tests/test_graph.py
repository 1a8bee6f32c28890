import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satconsensus.errors import NoSpanningTree, NotStronglyConnected, DimensionMismatch
from satconsensus.graph import (
    M_MATRIX_BLOCK,
    ROOT_BLOCK,
    DirectedGraph,
    augmented_laplacian,
    diagonal_blocks,
    has_spanning_tree,
    in_degrees,
    is_nonsingular_m_matrix,
    is_strongly_connected,
    laplacian,
    left_eigenvector,
    lhat,
    perron_frobenius_form,
    permuted_laplacian,
    strongly_connected_components,
)
from satconsensus.presets import ring_with_chord

from conftest import random_spanning_tree_graph, random_strongly_connected, reachable

RING3 = DirectedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
CHAIN3 = DirectedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


def test_rejects_bad_weights():
    with pytest.raises(ValueError):
        DirectedGraph(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        DirectedGraph(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        DirectedGraph(np.zeros((2, 3)))


def test_weights_are_read_only():
    with pytest.raises(ValueError):
        RING3.weights[0, 1] = 5.0


def test_laplacian_examples():
    assert laplacian(DirectedGraph(np.zeros((1, 1)))).tolist() == [[0.0]]
    both = DirectedGraph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])
    assert laplacian(both).tolist() == [[1, -1], [-1, 1]]
    assert laplacian(RING3).tolist() == [[1, 0, -1], [-1, 1, 0], [0, -1, 1]]


def test_in_degrees_examples():
    assert in_degrees(DirectedGraph(np.zeros((3, 3)))).tolist() == [0, 0, 0]
    assert in_degrees(RING3).tolist() == [1, 1, 1]
    g = DirectedGraph(np.array([[0.0, 2.0], [1.0, 0.0]]))
    assert in_degrees(g).tolist() == [2, 1]


def test_connectivity_examples():
    assert is_strongly_connected(RING3)
    assert not is_strongly_connected(CHAIN3)
    assert is_strongly_connected(ring_with_chord(7))
    assert has_spanning_tree(CHAIN3)
    assert not has_spanning_tree(DirectedGraph(np.zeros((2, 2))))
    ring_plus_sink = DirectedGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)])
    assert has_spanning_tree(ring_plus_sink)


def test_reproduction_topology_reaches_everything_from_every_node():
    w = ring_with_chord(7).weights
    assert all(reachable(w, r) == set(range(7)) for r in range(7))


def test_left_eigenvector_examples(frozen):
    sym = DirectedGraph.from_edges(4, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0), (2, 3, 0.5), (3, 2, 0.5)])
    assert np.allclose(left_eigenvector(sym), 0.25, atol=1e-12)
    assert np.allclose(left_eigenvector(RING3), frozen["omega_3ring"], atol=1e-12)
    two = DirectedGraph(np.array([[0.0, 2.0], [1.0, 0.0]]))
    assert np.allclose(left_eigenvector(two), frozen["omega_2cycle_a12_2"], atol=1e-12)
    assert np.allclose(left_eigenvector(ring_with_chord(7)), frozen["omega_ring_chord_7"], atol=1e-12)


def test_left_eigenvector_requires_strong_connectivity():
    with pytest.raises(NotStronglyConnected):
        left_eigenvector(CHAIN3)


def test_lhat_examples():
    sym = DirectedGraph.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
    assert np.allclose(lhat(sym, left_eigenvector(sym)), 2 * laplacian(sym) / 3, atol=1e-12)
    h = lhat(RING3, left_eigenvector(RING3))
    assert np.allclose(h, h.T)
    assert np.allclose(h.sum(axis=1), 0, atol=1e-12)
    assert abs(np.linalg.eigvalsh(h).min()) < 1e-12
    one = DirectedGraph(np.zeros((1, 1)))
    assert lhat(one, left_eigenvector(one)).tolist() == [[0.0]]
    with pytest.raises(DimensionMismatch):
        lhat(RING3, np.ones(2) / 2)


def test_perron_frobenius_examples():
    dec = perron_frobenius_form(RING3)
    assert [sorted(b) for b in dec.blocks] == [[0, 1, 2]]
    dec = perron_frobenius_form(CHAIN3)
    assert [list(b) for b in dec.blocks] == [[0], [1], [2]]
    assert dec.block_kinds == (ROOT_BLOCK, M_MATRIX_BLOCK, M_MATRIX_BLOCK)
    g = DirectedGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)])
    dec = perron_frobenius_form(g)
    assert [sorted(b) for b in dec.blocks] == [[0, 1, 2], [3]]
    assert dec.sizes == (3, 1)


def test_perron_frobenius_refuses_multiple_roots():
    with pytest.raises(NoSpanningTree):
        perron_frobenius_form(DirectedGraph.from_edges(3, [(0, 2, 1.0), (1, 2, 1.0)]))


def test_m_matrix_examples():
    assert is_nonsingular_m_matrix(np.eye(3))
    assert not is_nonsingular_m_matrix(np.zeros((1, 1)))
    assert is_nonsingular_m_matrix(np.array([[1.0, 0.0], [-1.0, 1.0]]))
    assert not is_nonsingular_m_matrix(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_augmented_laplacian_row_sums():
    k = np.full(3, 0.5)
    aug = augmented_laplacian(RING3, k, 0.9)
    assert aug.shape == (6, 6)
    assert np.allclose(aug.sum(axis=1), 0)


def test_json_round_trip():
    g = ring_with_chord(7)
    data = g.to_json()
    assert data["edges"][0]["from"] >= 1
    g2 = DirectedGraph.from_json(json.loads(json.dumps(data)))
    assert np.array_equal(g.weights, g2.weights)
    g3 = DirectedGraph.from_json({"n": 2, "edges": [{"from": 1, "to": 2}]})
    assert g3.weights[1, 0] == 1.0


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 12))
    flat = draw(st.lists(st.sampled_from([0.0, 0.0, 0.0, 0.5, 1.0, 2.5]), min_size=n * n, max_size=n * n))
    w = np.array(flat).reshape(n, n)
    np.fill_diagonal(w, 0.0)
    return DirectedGraph(w)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_random_graph_properties(g):
    lap = laplacian(g)
    assert np.abs(lap.sum(axis=1)).max() < 1e-12
    w = g.weights
    reach = [reachable(w, r) for r in range(g.n)]
    sc = all(len(r) == g.n for r in reach)
    assert is_strongly_connected(g) == sc
    assert has_spanning_tree(g) == any(len(r) == g.n for r in reach)
    if sc:
        assert has_spanning_tree(g)
    # SCC membership agrees with mutual reachability
    for comp in strongly_connected_components(g):
        for a in comp:
            for b in comp:
                assert b in reach[a]


def test_random_strongly_connected_left_eigenvectors():
    rng = np.random.default_rng(7)
    for _ in range(50):
        g = random_strongly_connected(rng, int(rng.integers(2, 31)))
        omega = left_eigenvector(g)
        assert np.abs(omega @ laplacian(g)).max() < 1e-10
        assert omega.min() > 0
        assert abs(omega.sum() - 1) < 1e-12
        assert np.linalg.eigvalsh(lhat(g, omega)).min() >= -1e-10


def test_random_perron_frobenius_forms():
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = random_spanning_tree_graph(rng)
        dec = perron_frobenius_form(g)
        pl = permuted_laplacian(g, dec)
        start = 0
        for size in dec.sizes:
            assert not np.any(pl[start : start + size, start + size :])
            start += size
        assert sum(dec.sizes) == g.n
        blocks = diagonal_blocks(g, dec)
        root = list(dec.blocks[0])
        assert is_strongly_connected(DirectedGraph(g.weights[np.ix_(root, root)]))
        assert all(is_nonsingular_m_matrix(b) for b in blocks[1:])
