"""Graphs, node features, labels and the structural operations on them.

Graphs are stored as scipy CSR adjacency matrices. Every algorithm in the
package works on the symmetrized view returned by :meth:`Graph.symmetric`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "Dataset",
    "from_edges",
    "symmetrize_max_abs",
    "top_k_sparsify",
    "row_top_k",
    "union_of_selections",
    "edge_homophily",
    "node_homophily",
    "build_knn_graph",
]


def _pick_max_abs(rows, cols, vals, n):
    """Collapse duplicate (row, col) entries keeping the one with larger |w|.

    Ties in |w| keep the larger signed value so the result is deterministic.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    order = np.lexsort((-vals, -np.abs(vals), cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    first = np.ones(rows.size, dtype=bool)
    first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    rows, cols, vals = rows[first], cols[first], vals[first]
    keep = vals != 0.0
    m = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    m.sort_indices()
    return m


def symmetrize_max_abs(m: sp.spmatrix) -> sp.csr_matrix:
    """Union-symmetrize ``m``: each unordered pair gets the entry of larger |w|."""
    coo = sp.coo_matrix(m)
    n = coo.shape[0]
    rows = np.concatenate([coo.row, coo.col])
    cols = np.concatenate([coo.col, coo.row])
    vals = np.concatenate([coo.data, coo.data])
    return _pick_max_abs(rows, cols, vals, n)


@dataclass(frozen=True)
class Graph:
    """Weighted graph on ``n_nodes`` nodes.

    ``adjacency`` is canonical: sorted CSR, no duplicates, no explicit zeros.
    When ``directed`` is False it is symmetric.
    """

    n_nodes: int
    adjacency: sp.csr_matrix
    directed: bool = False

    def __post_init__(self):
        if self.adjacency.shape != (self.n_nodes, self.n_nodes):
            raise ValueError(
                f"adjacency shape {self.adjacency.shape} does not match n_nodes={self.n_nodes}"
            )
        if not self.directed:
            diff = abs(self.adjacency - self.adjacency.T)
            if diff.nnz and diff.max() != 0.0:
                raise ValueError("undirected graph requires a symmetric adjacency")

    @property
    def n_edges(self) -> int:
        """Number of unordered node pairs joined by an edge (self-loops excluded)."""
        s = self.symmetric()
        return int(sp.triu(s, k=1).nnz)

    def symmetric(self) -> sp.csr_matrix:
        """Symmetrized adjacency; directed inputs are merged with the max-|w| rule."""
        if not self.directed:
            return self.adjacency
        return symmetrize_max_abs(self.adjacency)

    def edges(self) -> list[tuple[int, int, float]]:
        """Canonical edge list.

        Undirected graphs list each pair once with ``u <= v``; directed graphs
        list every stored entry.
        """
        m = self.adjacency if self.directed else sp.triu(self.adjacency).tocsr()
        coo = m.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            (int(coo.row[i]), int(coo.col[i]), float(coo.data[i])) for i in order
        ]

    def degrees(self) -> np.ndarray:
        """Unweighted degree of every node in the symmetrized view."""
        s = self.symmetric()
        return np.diff(s.indptr)

    def to_undirected(self) -> "Graph":
        return Graph(self.n_nodes, self.symmetric(), directed=False)


def from_edges(n_nodes, edges, directed=False) -> Graph:
    """Build a canonical :class:`Graph` from ``(u, v[, w])`` tuples.

    Duplicate entries collapse with the max-|w| rule. For undirected graphs
    ``(u, v)`` and ``(v, u)`` describe the same edge.
    """
    edges = list(edges)
    if edges:
        arr = np.array([(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges], dtype=np.float64)
        u = arr[:, 0].astype(np.int64)
        v = arr[:, 1].astype(np.int64)
        w = arr[:, 2]
        if np.any(arr[:, :2] != np.floor(arr[:, :2])):
            raise ValueError("node ids must be integers")
    else:
        u = v = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    bad = (u < 0) | (u >= n_nodes) | (v < 0) | (v >= n_nodes)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"edge ({u[i]}, {v[i]}) out of range for n_nodes={n_nodes}")
    if directed:
        adj = _pick_max_abs(u, v, w, n_nodes)
    else:
        adj = _pick_max_abs(np.concatenate([u, v]), np.concatenate([v, u]), np.concatenate([w, w]), n_nodes)
    return Graph(n_nodes, adj, directed=directed)


@dataclass(frozen=True)
class Dataset:
    """A graph with node features and (optionally) class labels."""

    graph: Graph
    features: Any  # dense ndarray or scipy sparse matrix, shape (N, F)
    labels: np.ndarray | None = None
    n_classes: int | None = None
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.graph.n_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(
                f"features have shape {self.features.shape}, expected ({n}, F)"
            )
        data = self.features.data if sp.issparse(self.features) else self.features
        if not np.all(np.isfinite(data)):
            raise ValueError("features contain non-finite values")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ValueError(f"labels have shape {labels.shape}, expected ({n},)")
            k = self.n_classes if self.n_classes is not None else int(labels.max()) + 1
            if labels.min() < 0 or labels.max() >= k:
                raise ValueError(f"class ids must lie in [0, {k})")
            object.__setattr__(self, "labels", labels.astype(np.int64))
            object.__setattr__(self, "n_classes", k)

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def one_hot(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return np.eye(self.n_classes)[self.labels]


def row_top_k(block: np.ndarray, row_offset: int, k: int):
    """Select the ``k`` largest off-diagonal entries of each row of ``block``.

    ``block`` holds rows ``row_offset .. row_offset + len(block)`` of a square
    matrix. Ties go to the lower column index. Returns COO triplets.
    """
    block = np.array(block, dtype=np.float64, copy=True)
    nb, n = block.shape
    k = min(k, n - 1)
    if k <= 0 or nb == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    r = np.arange(nb)
    block[r, r + row_offset] = -np.inf
    order = np.argsort(-block, axis=1, kind="stable")[:, :k]
    rows = np.repeat(r + row_offset, k)
    cols = order.ravel()
    vals = block[np.repeat(r, k), cols]
    return rows, cols, vals


def top_k_sparsify(dense_adjacency, k: int, block_size: int = 1024) -> Graph:
    """Keep the ``k`` largest entries (by signed value) per row, then symmetrize.

    Selection ignores the diagonal. Each unordered pair picked by either
    endpoint survives with the larger-|w| of the two entries; zero-valued
    picks are dropped.
    """
    m = np.asarray(dense_adjacency, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = m.shape[0]
    parts = [row_top_k(m[s : s + block_size], s, k) for s in range(0, n, block_size)]
    return union_of_selections(parts, n)


def union_of_selections(parts, n) -> Graph:
    """Union-symmetrize per-row selections given as ``(rows, cols, vals)`` triplets."""
    rows = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    cols = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    vals = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0)
    adj = _pick_max_abs(
        np.concatenate([rows, cols]), np.concatenate([cols, rows]), np.concatenate([vals, vals]), n
    )
    return Graph(n, adj, directed=False)


def edge_homophily(g: Graph, labels) -> float:
    """Fraction of (undirected, non-loop) edges joining same-label nodes."""
    labels = np.asarray(labels)
    if labels.shape != (g.n_nodes,):
        raise ValueError("labels must cover every node")
    upper = sp.triu(g.symmetric(), k=1).tocoo()
    if upper.nnz == 0:
        raise ValueError("undefined homophily: graph has no edges")
    return float(np.mean(labels[upper.row] == labels[upper.col]))


def node_homophily(g: Graph, labels) -> float:
    """Mean over non-isolated nodes of the same-label fraction of their neighbours."""
    labels = np.asarray(labels)
    s = g.symmetric().tolil()
    s.setdiag(0)
    coo = sp.coo_matrix(s)
    coo.eliminate_zeros()
    if coo.nnz == 0:
        raise ValueError("undefined homophily: graph has no edges")
    same = (labels[coo.row] == labels[coo.col]).astype(float)
    deg = np.bincount(coo.row, minlength=g.n_nodes)
    hits = np.bincount(coo.row, weights=same, minlength=g.n_nodes)
    mask = deg > 0
    return float(np.mean(hits[mask] / deg[mask]))


def build_knn_graph(x, k: int, metric: str = "cosine", block_size: int = 512) -> Graph:
    """Connect every node to its ``k`` nearest neighbours (weight 1, union-symmetrized).

    Ties go to the lower node index.
    """
    x = x.toarray() if sp.issparse(x) else np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N (got k={k}, N={n})")
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ValueError(f"row {zero[0]} has zero norm; cosine similarity undefined")
        x = x / norms[:, None]
        sq = None
    elif metric == "euclidean":
        sq = np.einsum("ij,ij->i", x, x)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    parts = []
    for s in range(0, n, block_size):
        xb = x[s : s + block_size]
        if sq is None:
            score = xb @ x.T
        else:
            # negated squared distance; larger is closer
            score = -(sq[s : s + block_size, None] - 2.0 * xb @ x.T + sq[None, :])
        rows, cols, _ = row_top_k(score, s, k)
        parts.append((rows, cols, np.ones(rows.size)))
    return union_of_selections(parts, n)
