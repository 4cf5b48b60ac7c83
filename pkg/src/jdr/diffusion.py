"""Personalized-PageRank graph diffusion with top-k sparsification."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, top_k_sparsify
from .spectral import ConvergenceError

__all__ = ["DiglConfig", "transition_matrix", "ppr_kernel", "ppr_diffuse"]


@dataclass(frozen=True)
class DiglConfig:
    """``alpha`` is the teleport probability of the PPR kernel."""

    alpha: float = 0.05
    top_k: int = 64
    tol: float = 1e-12
    max_iter: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}; the kernel is undefined at 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def transition_matrix(g: Graph) -> sp.csr_matrix:
    """``D^-1/2 A D^-1/2`` of the symmetrized graph; isolated nodes get a self-loop first."""
    adj = g.symmetric().astype(np.float64).tolil()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    for i in np.flatnonzero(deg == 0):
        adj[i, i] = 1.0
    adj = adj.tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    return (inv_sqrt @ adj @ inv_sqrt).tocsr()


def ppr_kernel(g: Graph, alpha: float, tol: float = 1e-12, max_iter: int = 10_000, columns=None) -> np.ndarray:
    """Columns of ``S = alpha (I - (1 - alpha) T)^-1`` by fixed-point iteration.

    Every column ``s`` solves ``s = alpha e + (1 - alpha) T s``. Each column
    stops on its own residual, so the result does not depend on which
    columns are requested together.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    t = transition_matrix(g)
    n = g.n_nodes
    cols = np.arange(n) if columns is None else np.asarray(columns)
    e = np.zeros((n, cols.size))
    e[cols, np.arange(cols.size)] = 1.0
    s = alpha * e
    active = np.arange(cols.size)
    res = 0.0
    for _ in range(max_iter):
        if active.size == 0:
            return s
        cur = s[:, active]
        nxt = alpha * e[:, active] + (1.0 - alpha) * (t @ cur)
        col_res = np.max(np.abs(nxt - cur), axis=0)
        s[:, active] = nxt
        res = float(col_res.max())
        active = active[col_res > tol]
    if active.size == 0:
        return s
    raise ConvergenceError(f"PPR iteration did not converge in {max_iter} steps", res)


def ppr_diffuse(g: Graph, cfg: DiglConfig, block_size: int = 512) -> Graph:
    """DIGL-style rewiring: PPR kernel followed by per-node top-k sparsification."""
    if cfg.alpha == 1.0:
        warnings.warn("identity kernel: alpha=1 leaves only self-weights, which are dropped", RuntimeWarning, stacklevel=2)
    n = g.n_nodes
    s = np.empty((n, n))
    for start in range(0, n, block_size):
        cols = np.arange(start, min(start + block_size, n))
        s[:, cols] = ppr_kernel(g, cfg.alpha, cfg.tol, cfg.max_iter, cols)
    return top_k_sparsify(s.T, cfg.top_k)
