"""Downstream evaluation without GNN training.

* spectral clustering on a graph (or a kNN graph of the features) with
  accuracy matched over class permutations,
* the one-step label-overlap check on the spiked Gaussian model,
* closed-form ridge regression of a linear one-layer GCN.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from .csbm import _rng, sample_gaussian_csbm_nonsym, sample_spiked_pair
from .graph import Graph, build_knn_graph
from .spectral import BY_VALUE, eigs_top, svd_top

__all__ = [
    "ClusteringResult",
    "Prop1Report",
    "RidgeMseReport",
    "SingularSystemError",
    "cluster_accuracy",
    "spectral_cluster",
    "spectral_cluster_features",
    "check_prop1",
    "ridge_gcn_mse",
    "ridge_denoise_sweep",
]

EXHAUSTIVE_MAX_K = 8


@dataclass
class ClusteringResult:
    assignments: np.ndarray
    accuracy: float | None
    permutation: dict | None
    kmeans_inertia: float
    notes: list = field(default_factory=list)


def cluster_accuracy(labels, assignments, k: int | None = None):
    """Best agreement between ``assignments`` and ``labels`` over relabelings.

    Exhaustive over all permutations for ``k <= 8``, Hungarian matching on
    the confusion matrix otherwise. Returns ``(accuracy, mapping)`` where
    ``mapping[cluster] = class``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    assignments = np.asarray(assignments, dtype=np.int64)
    if k is None:
        k = int(max(labels.max(), assignments.max())) + 1
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (assignments, labels), 1)
    if k <= EXHAUSTIVE_MAX_K:
        best, best_perm = -1, None
        for perm in itertools.permutations(range(k)):
            hits = conf[np.arange(k), perm].sum()
            if hits > best:
                best, best_perm = hits, perm
        mapping = {c: int(best_perm[c]) for c in range(k)}
    else:
        rows, cols = linear_sum_assignment(-conf)
        best = conf[rows, cols].sum()
        mapping = {int(r): int(c) for r, c in zip(rows, cols)}
    return float(best) / labels.size, mapping


def _laplacian_embedding(adj, m, seed):
    deg = np.asarray(abs(adj).sum(axis=1)).ravel()
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    norm_adj = sp.diags(inv_sqrt) @ adj @ sp.diags(inv_sqrt)
    # smallest eigenvectors of I - D^-1/2 A D^-1/2 are the largest of the normalized adjacency
    return eigs_top(sp.csr_matrix(norm_adj), m, BY_VALUE, seed=seed).vectors


def spectral_cluster(
    g,
    k: int,
    labels=None,
    skip_first: bool = True,
    ordering: str = BY_VALUE,
    seed: int = 0,
    laplacian: bool = False,
) -> ClusteringResult:
    """k-means on the leading eigenvectors of the (symmetrized) adjacency.

    Computes the ``k`` leading eigenvectors under ``ordering``, drops the
    first one when ``skip_first`` (leaving ``k - 1`` coordinates), and runs
    k-means (k-means++ init, 10 restarts, 300 iterations) on the rows. With ``laplacian=True`` the
    embedding comes from the symmetric normalized Laplacian instead.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    adj = g.symmetric() if isinstance(g, Graph) else sp.csr_matrix(g)
    if adj.nnz == 0:
        raise ValueError("graph has no edges")
    notes = []
    n_comp = sp.csgraph.connected_components(adj, directed=False)[0]
    if n_comp > 1:
        notes.append(f"graph is disconnected ({n_comp} components)")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    m = min(k, adj.shape[0])
    if laplacian:
        vecs = _laplacian_embedding(adj, m, seed)
    else:
        vecs = eigs_top(adj.astype(np.float64), m, ordering, seed=seed).vectors
    emb = vecs[:, int(skip_first):]
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=300, random_state=seed)
    assign = km.fit_predict(emb)
    acc = perm = None
    if labels is not None:
        acc, perm = cluster_accuracy(labels, assign, k)
    return ClusteringResult(assign, acc, perm, float(km.inertia_), notes)


def spectral_cluster_features(x, k: int, labels=None, knn_k: int = 10, metric: str = "cosine", seed: int = 0, **kw):
    """Spectral clustering on the kNN graph of the node features."""
    g = build_knn_graph(x, knn_k, metric)
    return spectral_cluster(g, k, labels, seed=seed, **kw)


@dataclass(frozen=True)
class Prop1Report:
    n_trials: int
    eta: float
    side: str
    mean_overlap_before: float
    mean_overlap_after: float
    fraction_improved: float
    hypotheses_hold: bool
    overlaps_before: np.ndarray
    overlaps_after: np.ndarray


def _leading_eigvec(a, seed):
    return eigs_top(a, 1, BY_VALUE, seed=seed, method="lanczos")


def check_prop1(n, f, lam, mu, eta, side="graph", n_trials=50, seed=0, renormalize=True) -> Prop1Report:
    """Empirical one-step overlap check on the spiked Gaussian model.

    Each trial interpolates the leading eigenvector of the spiked GOE matrix
    towards the leading left singular vector of the features (``side="graph"``)
    or the other way round (``side="features"``), applies the exact rank-one
    update and compares squared overlaps with the normalized labels.

    With ``renormalize`` the interpolated vector is rescaled to unit norm, so
    the update rotates the spike without shrinking it. Unnormalized vectors
    lose up to ``2 eta (1 - |<v, u>|)`` of the spike strength, which near the
    detection threshold is enough to sink the outlier into the bulk.
    """
    if side not in ("graph", "features"):
        raise ValueError("side must be 'graph' or 'features'")
    gamma = n / f
    hypotheses = lam > 1 and mu > math.sqrt(gamma)
    if not hypotheses:
        warnings.warn("lambda <= 1 or mu <= sqrt(gamma): outside the regime of the claim", RuntimeWarning, stacklevel=2)
    before, after = np.empty(n_trials), np.empty(n_trials)
    for t in range(n_trials):
        trial_seed = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        pair = sample_spiked_pair(n, f, lam, mu, trial_seed)
        y = pair.y_unit
        ab = _leading_eigvec(pair.a_c, trial_seed)
        xb = svd_top(pair.x, 1, seed=trial_seed, method="lanczos")
        v, u, w = ab.vectors[:, 0], xb.left[:, 0], xb.right[:, 0]
        sign = -1.0 if v @ u < 0 else 1.0
        if side == "graph":
            if eta == 0.0:
                v_new = ab
            else:
                vt = (1 - eta) * v + eta * sign * u
                if renormalize:
                    vt /= np.linalg.norm(vt)
                a_new = pair.a_c + ab.values[0] * (np.outer(vt, vt) - np.outer(v, v))
                v_new = _leading_eigvec(a_new, trial_seed)
            before[t] = (v @ y) ** 2
            after[t] = (v_new.vectors[:, 0] @ y) ** 2
        else:
            if eta == 0.0:
                u_new = xb
            else:
                ut = (1 - eta) * u + eta * sign * v
                if renormalize:
                    ut /= np.linalg.norm(ut)
                x_new = pair.x + xb.values[0] * np.outer(ut - u, w)
                u_new = svd_top(x_new, 1, seed=trial_seed, method="lanczos")
            before[t] = (u @ y) ** 2
            after[t] = (u_new.left[:, 0] @ y) ** 2
    return Prop1Report(
        n_trials, eta, side, float(before.mean()), float(after.mean()),
        float(np.mean(after > before)), hypotheses, before, after,
    )


class SingularSystemError(np.linalg.LinAlgError):
    pass


COND_LIMIT = 1e12


def ridge_gcn_mse(a, x, y, r: float) -> float:
    """Training MSE of the ridge-regularized linear one-layer GCN ``A X w``.

    Minimizes ``(1/N)|A X w - y|^2 + (r/N)|w|^2`` in closed form through a
    QR factorization of the stacked system ``[Z; sqrt(r) I]``.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    z = np.asarray(a @ x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, f = z.shape
    if r == 0:
        s = np.linalg.svd(z, compute_uv=False)
        if s.size < f or s[-1] == 0 or s[0] / s[-1] > math.sqrt(COND_LIMIT):
            raise SingularSystemError("Gram matrix is (numerically) singular at r=0; use r > 0")
        stacked, rhs = z, y
    else:
        stacked = np.vstack([z, math.sqrt(r) * np.eye(f)])
        rhs = np.concatenate([y, np.zeros(f)])
    q, rr = la.qr(stacked, mode="economic")
    w = la.solve_triangular(rr, q.T @ rhs)
    resid = z @ w - y
    return float(resid @ resid) / n


@dataclass(frozen=True)
class RidgeMseReport:
    side: str
    eta: np.ndarray
    mean_mse: np.ndarray
    std_mse: np.ndarray
    r: float

    def rows(self):
        return list(zip(self.eta.tolist(), self.mean_mse.tolist(), self.std_mse.tolist()))


def ridge_denoise_sweep(n, f, lam, mu, side="A", eta_grid=(0.0,), n_trials=10, r=1.0, seed=0) -> RidgeMseReport:
    """Ridge-GCN MSE over ``eta_grid`` after ``A + eta X X^T`` (side A) or ``X + eta A X`` (side X)."""
    if side not in ("A", "X"):
        raise ValueError("side must be 'A' or 'X'")
    eta_grid = np.asarray(eta_grid, dtype=np.float64)
    mse = np.empty((n_trials, eta_grid.size))
    for t in range(n_trials):
        a, x, y = sample_gaussian_csbm_nonsym(n, f, lam, mu, seed=int(_rng(seed, 100 + t).integers(2**31)))
        if side == "A":
            xxt = x @ x.T
            for e, eta in enumerate(eta_grid):
                mse[t, e] = ridge_gcn_mse(a + eta * xxt if eta else a, x, y, r)
        else:
            ax = a @ x
            for e, eta in enumerate(eta_grid):
                mse[t, e] = ridge_gcn_mse(a, x + eta * ax if eta else x, y, r)
    return RidgeMseReport(side, eta_grid, mse.mean(axis=0), mse.std(axis=0), r)
