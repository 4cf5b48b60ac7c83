import warnings

import numpy as np
import pytest

from jdr.csbm import CsbmParams, sample_csbm
from jdr.diffusion import DiglConfig, ppr_diffuse, ppr_kernel, transition_matrix
from jdr.graph import from_edges


def test_alpha_one_identity_kernel():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert np.allclose(ppr_kernel(g, 1.0), np.eye(4))
    with pytest.warns(RuntimeWarning, match="identity kernel"):
        out = ppr_diffuse(g, DiglConfig(alpha=1.0, top_k=2))
    assert out.adjacency.nnz == 0


def test_two_node_closed_form():
    g = from_edges(2, [(0, 1)])
    alpha = 0.5
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    ref = alpha * np.linalg.inv(np.eye(2) - (1 - alpha) * t)
    assert np.max(np.abs(ppr_kernel(g, alpha) - ref)) < 1e-10


def test_kernel_matches_dense_inverse(small_csbm):
    g = small_csbm.graph
    t = transition_matrix(g).toarray()
    ref = 0.2 * np.linalg.inv(np.eye(g.n_nodes) - 0.8 * t)
    s = ppr_kernel(g, 0.2)
    assert np.max(np.abs(s - ref)) < 1e-10
    assert s.min() >= 0


def test_columns_independent(small_csbm):
    g = small_csbm.graph
    full = ppr_kernel(g, 0.3)
    part = ppr_kernel(g, 0.3, columns=[5, 2, 17])
    assert np.array_equal(part, full[:, [5, 2, 17]])


def test_isolated_node_gets_self_loop():
    g = from_edges(3, [(0, 1)])
    t = transition_matrix(g).toarray()
    assert t[2, 2] == 1.0
    assert np.all(ppr_kernel(g, 0.1) >= 0)


def test_alpha_validation():
    with pytest.raises(ValueError, match="undefined"):
        DiglConfig(alpha=0.0)
    with pytest.raises(ValueError):
        ppr_kernel(from_edges(2, [(0, 1)]), 0.0)


def test_diffusion_densifies_and_is_symmetric():
    d = sample_csbm(CsbmParams.from_phi(0.8, n=100, f=10, d=5, seed=0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = ppr_diffuse(d.graph, DiglConfig(alpha=0.05, top_k=64))
    a = out.adjacency
    assert a.nnz > d.graph.adjacency.nnz
    assert abs(a - a.T).max() == 0
    assert a.data.min() >= 0


def test_blocking_independent(small_csbm):
    a = ppr_diffuse(small_csbm.graph, DiglConfig(alpha=0.1, top_k=8), block_size=37).adjacency
    b = ppr_diffuse(small_csbm.graph, DiglConfig(alpha=0.1, top_k=8), block_size=512).adjacency
    assert (a != b).nnz == 0
