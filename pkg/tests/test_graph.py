import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from jdr.graph import (
    Dataset,
    Graph,
    build_knn_graph,
    edge_homophily,
    from_edges,
    node_homophily,
    symmetrize_max_abs,
    top_k_sparsify,
)


def weights(g):
    return {(u, v): w for u, v, w in g.edges()}


def test_single_edge_is_symmetric():
    g = from_edges(2, [(0, 1, 1.0)])
    a = g.adjacency.toarray()
    assert a[0, 1] == a[1, 0] == 1.0
    assert g.n_edges == 1


def test_edgeless_graph():
    g = from_edges(3, [])
    assert g.n_edges == 0 and g.adjacency.nnz == 0


def test_duplicate_edges_keep_max_abs():
    g = from_edges(3, [(0, 1, 0.5), (1, 0, -2.0), (1, 2, 1.0), (1, 2, 1.0)])
    assert weights(g) == {(0, 1): -2.0, (1, 2): 1.0}


def test_out_of_range_edge():
    with pytest.raises(ValueError, match="out of range"):
        from_edges(2, [(0, 2)])


def test_directed_symmetrized_view():
    g = from_edges(3, [(0, 1, 1.0), (1, 0, 3.0), (2, 0, -0.5)], directed=True)
    s = g.symmetric().toarray()
    assert np.array_equal(s, s.T)
    assert s[0, 1] == 3.0 and s[0, 2] == -0.5
    assert g.n_edges == 2


def test_undirected_requires_symmetry():
    with pytest.raises(ValueError, match="symmetric"):
        Graph(2, sp.csr_matrix(np.array([[0, 1.0], [0, 0]])))


def test_dataset_validation():
    g = from_edges(3, [(0, 1)])
    with pytest.raises(ValueError, match="features"):
        Dataset(g, np.zeros((2, 4)))
    with pytest.raises(ValueError, match="non-finite"):
        Dataset(g, np.full((3, 2), np.nan))
    with pytest.raises(ValueError, match="class ids"):
        Dataset(g, np.zeros((3, 2)), np.array([0, 1, 2]), n_classes=2)
    d = Dataset(g, np.zeros((3, 2)), np.array([0, 1, 1]))
    assert d.n_classes == 2
    assert d.one_hot().tolist() == [[1, 0], [0, 1], [0, 1]]


def test_top_k_row_example():
    m = np.array([[0.0, 0.5, -0.2, 0.9], [0.5, 0, 0, 0], [-0.2, 0, 0, 0], [0.9, 0, 0, 0]])
    # row 0 without its diagonal is [0.5, -0.2, 0.9]; k=2 keeps columns 3 and 1
    g = top_k_sparsify(m, 2)
    w = weights(g)
    assert w[(0, 3)] == 0.9 and w[(0, 1)] == 0.5
    assert (0, 2) not in w


def test_top_k_full_is_identity_minus_diagonal(rng):
    m = rng.normal(size=(6, 6))
    m = m + m.T
    g = top_k_sparsify(m, 6)
    expect = m.copy()
    np.fill_diagonal(expect, 0.0)
    assert np.array_equal(g.adjacency.toarray(), expect)


def _brute_top_k(m, k):
    n = m.shape[0]
    picks = {}
    for i in range(n):
        cand = sorted((j for j in range(n) if j != i), key=lambda j: (-m[i, j], j))[:k]
        for j in cand:
            for key in ((i, j), (j, i)):
                old = picks.get(key)
                w = m[i, j]
                if old is None or abs(w) > abs(old) or (abs(w) == abs(old) and w > old):
                    picks[key] = w
    out = np.zeros_like(m)
    for (i, j), w in picks.items():
        out[i, j] = w
    return out


def test_top_k_asymmetric_survivors_4x4():
    m = np.array([
        [0.0, 0.9, 0.1, 0.2],
        [0.0, 0.0, 0.3, 0.8],
        [0.7, 0.6, 0.0, 0.5],
        [0.4, 0.05, 0.02, 0.0],
    ])
    g = top_k_sparsify(m, 1)
    a = g.adjacency.toarray()
    assert np.array_equal(a, _brute_top_k(m, 1))
    # (2, 0) is chosen only by row 2 but appears on both sides
    assert a[0, 2] == a[2, 0] == 0.7


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_top_k_matches_brute_force(n, k, seed):
    m = np.random.default_rng(seed).normal(size=(n, n)).round(2)
    g = top_k_sparsify(m, k)
    a = g.adjacency.toarray()
    assert np.array_equal(a, a.T)
    assert np.array_equal(a, _brute_top_k(m, k))
    kk = min(k, n - 1)
    nnz_rows = np.diff(g.adjacency.indptr)
    assert g.adjacency.nnz <= 2 * kk * n
    assert np.all(nnz_rows >= np.minimum(kk, np.count_nonzero(m - np.diag(np.diag(m)), axis=1)))


def test_top_k_blocking_independent(rng):
    m = rng.normal(size=(50, 50))
    a = top_k_sparsify(m, 5, block_size=7).adjacency
    b = top_k_sparsify(m, 5, block_size=1024).adjacency
    assert (a != b).nnz == 0


def test_top_k_rejects_non_square():
    with pytest.raises(ValueError):
        top_k_sparsify(np.zeros((2, 3)), 1)


def test_homophily_extremes():
    clique = lambda nodes: list(itertools.combinations(nodes, 2))
    g = from_edges(6, clique([0, 1, 2]) + clique([3, 4, 5]))
    assert edge_homophily(g, [0, 0, 0, 1, 1, 1]) == 1.0
    bip = from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert edge_homophily(bip, [0, 0, 1, 1]) == 0.0
    assert node_homophily(bip, [0, 0, 1, 1]) == 0.0


def test_homophily_edgeless_raises():
    with pytest.raises(ValueError, match="undefined homophily"):
        edge_homophily(from_edges(3, []), [0, 1, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_homophily_label_permutation_invariant(seed):
    r = np.random.default_rng(seed)
    n = 15
    edges = [(int(u), int(v)) for u, v in r.integers(0, n, size=(30, 2)) if u != v]
    if not edges:
        return
    g = from_edges(n, edges)
    labels = r.integers(0, 3, size=n)
    perm = r.permutation(3)
    assert edge_homophily(g, labels) == edge_homophily(g, perm[labels])


def test_symmetrize_max_abs():
    m = sp.csr_matrix(np.array([[0, 2.0, 0], [-3.0, 0, 1.0], [0, 0, 0]]))
    s = symmetrize_max_abs(m).toarray()
    assert s[0, 1] == s[1, 0] == -3.0
    assert s[1, 2] == s[2, 1] == 1.0


def test_knn_collinear():
    g = build_knn_graph(np.array([[0.0], [1.0], [2.5]]), 1, metric="euclidean")
    assert set(weights(g)) == {(0, 1), (1, 2)}


def test_knn_ties_lower_index():
    x = np.ones((4, 3))
    g1 = build_knn_graph(x, 1)
    g2 = build_knn_graph(x, 1)
    # every row ties; each node picks the lowest other index
    assert set(weights(g1)) == {(0, 1), (0, 2), (0, 3)}
    assert (g1.adjacency != g2.adjacency).nnz == 0


def test_knn_zero_row_named():
    x = np.ones((4, 2))
    x[2] = 0
    with pytest.raises(ValueError, match="row 2"):
        build_knn_graph(x, 1)


@pytest.mark.parametrize("metric", ["cosine", "euclidean"])
def test_knn_matches_brute_force(rng, metric):
    x = rng.normal(size=(20, 5))
    k = 3
    g = build_knn_graph(x, k, metric)
    expect = set()
    for i in range(20):
        if metric == "cosine":
            xn = x / np.linalg.norm(x, axis=1, keepdims=True)
            score = [(-(xn[i] @ xn[j]), j) for j in range(20) if j != i]
        else:
            score = [(np.sum((x[i] - x[j]) ** 2), j) for j in range(20) if j != i]
        for _, j in sorted(score)[:k]:
            expect.add((min(i, j), max(i, j)))
    assert set(weights(g)) == expect
    assert all(w == 1.0 for w in weights(g).values())
