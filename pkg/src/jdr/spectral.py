"""Truncated eigendecompositions and SVDs.

Two routes are available for each decomposition:

* ``"lanczos"``: implicitly restarted Lanczos (ARPACK via scipy) working
  only through matrix-vector products, so sparse matrices and
  sparse-plus-low-rank operators are never densified. Singular triplets
  come from Lanczos on the Gram matrix of the smaller side.
* ``"dense"``: full LAPACK decomposition, used for small problems and as a
  reference in tests.

``method="auto"`` picks the dense route when the smaller dimension is at
most :data:`DENSE_CUTOFF`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, aslinearoperator, eigsh

__all__ = [
    "BY_VALUE",
    "BY_ABS",
    "DENSE_CUTOFF",
    "ConvergenceError",
    "SpectralBasis",
    "SvdBasis",
    "eigs_top",
    "svd_top",
    "synthesize",
    "canonicalize_signs",
]

BY_VALUE = "by_value_desc"
BY_ABS = "by_abs_desc"
ORDERINGS = (BY_VALUE, BY_ABS)
DENSE_CUTOFF = 512


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach the requested residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (worst residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SpectralBasis:
    """Leading eigenpairs: ``vectors[:, i]`` belongs to ``values[i]``."""

    vectors: np.ndarray
    values: np.ndarray
    ordering: str = BY_VALUE

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    def head(self, L: int) -> "SpectralBasis":
        return SpectralBasis(self.vectors[:, :L], self.values[:L], self.ordering)


@dataclass(frozen=True)
class SvdBasis:
    """Leading singular triplets, singular values descending."""

    left: np.ndarray
    values: np.ndarray
    right: np.ndarray
    degenerate: bool = False

    @property
    def n_triplets(self) -> int:
        return self.values.shape[0]

    def head(self, L: int) -> "SvdBasis":
        return SvdBasis(self.left[:, :L], self.values[:L], self.right[:, :L], self.degenerate)


def canonicalize_signs(vectors: np.ndarray, *others: np.ndarray):
    """Flip columns so each column's largest-|entry| is nonnegative.

    Any ``others`` (e.g. right singular vectors) receive the same flips.
    """
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return (vectors, *others) if others else vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[idx, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    vectors *= signs
    if others:
        return (vectors, *[o * signs for o in others])
    return vectors


def _order(values, ordering):
    if ordering == BY_VALUE:
        return np.lexsort((np.arange(values.size), -values))
    if ordering == BY_ABS:
        return np.lexsort((np.arange(values.size), -values, -np.abs(values)))
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def _as_dense(m, n_cols):
    if isinstance(m, np.ndarray):
        return m
    if sp.issparse(m):
        return m.toarray()
    if hasattr(m, "to_dense"):
        return m.to_dense()
    return np.asarray(m @ np.eye(n_cols))


def default_max_iter(L, n):
    return 10 * L * math.ceil(math.sqrt(n))


def _check_symmetric(m):
    if isinstance(m, np.ndarray):
        asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    elif sp.issparse(m):
        d = (m - m.T).tocoo()
        asym = np.max(np.abs(d.data)) if d.nnz else 0.0
    else:
        return
    if asym > 1e-12:
        raise ValueError(f"matrix is not symmetric (max |m - m^T| = {asym:.3e})")


def _eig_residuals(op, vecs, vals):
    mv = op.matmat(vecs) if isinstance(op, LinearOperator) else op @ vecs
    return np.linalg.norm(mv - vecs * vals, axis=0)


def eigs_top(
    m,
    L: int,
    ordering: str = BY_VALUE,
    tol: float = 1e-8,
    max_iter: int | None = None,
    seed: int = 0,
    method: str = "auto",
) -> SpectralBasis:
    """Return the ``L`` leading eigenpairs of the symmetric matrix ``m``.

    Parameters
    ----------
    m : ndarray, sparse matrix or LinearOperator
        Symmetric ``N x N`` matrix. Operators are trusted to be symmetric.
    L : int
        Number of eigenpairs, ``1 <= L <= N``.
    ordering : {"by_value_desc", "by_abs_desc"}
        Largest algebraic values first, or largest magnitudes first.
    tol : float
        Every returned pair satisfies ``|m v - lam v| <= tol * max(1, |lam|)``.
    max_iter : int, optional
        Restart budget for the Lanczos route; defaults to ``10 L ceil(sqrt(N))``.
    seed : int
        Seeds the Lanczos starting vector.
    method : {"auto", "lanczos", "dense"}

    Raises
    ------
    ConvergenceError
        If the residual bound is not met.
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= L <= n:
        raise ValueError(f"L must satisfy 1 <= L <= N (got L={L}, N={n})")
    _check_symmetric(m)
    if max_iter is None:
        max_iter = default_max_iter(L, n)
    if method == "auto":
        method = "dense" if (n <= DENSE_CUTOFF or L >= n - 1) else "lanczos"
    if method == "lanczos" and L >= n - 1:
        method = "dense"

    if method == "dense":
        dense = _as_dense(m, n)
        vals, vecs = np.linalg.eigh((dense + dense.T) / 2.0)
    elif method == "lanczos":
        op = m if isinstance(m, LinearOperator) else aslinearoperator(m)
        v0 = np.random.default_rng(seed).standard_normal(n)
        which = "LA" if ordering == BY_VALUE else "LM"
        try:
            vals, vecs = eigsh(op, k=L, which=which, v0=v0, tol=tol / 10.0, maxiter=max_iter)
        except ArpackNoConvergence as err:
            res = _eig_residuals(op, err.eigenvectors, err.eigenvalues) if len(err.eigenvalues) else [np.inf]
            raise ConvergenceError(f"Lanczos did not converge for L={L}", float(np.max(res))) from None
    else:
        raise ValueError(f"unknown method {method!r}")

    order = _order(vals, ordering)[:L]
    vals = np.array(vals[order])
    vecs = canonicalize_signs(vecs[:, order])
    res = _eig_residuals(m, vecs, vals)
    bound = tol * np.maximum(1.0, np.abs(vals))
    if np.any(res > bound):
        worst = float(np.max(res / np.maximum(1.0, np.abs(vals))))
        raise ConvergenceError(f"eigenpair residual above tolerance {tol:g}", worst)
    return SpectralBasis(vecs, vals, ordering)


def _is_zero(x):
    if isinstance(x, np.ndarray):
        return not np.any(x)
    if sp.issparse(x):
        return x.count_nonzero() == 0
    return False


def svd_top(
    x,
    L: int,
    tol: float = 1e-8,
    max_iter: int | None = None,
    seed: int = 0,
    method: str = "auto",
) -> SvdBasis:
    """Return the ``L`` leading singular triplets of ``x`` (``N x F``).

    Residuals ``|x w - s u|`` and ``|x^T u - s w|`` are at most ``tol * s_1``.
    A zero matrix yields unit coordinate vectors and ``degenerate=True``.
    """
    n, f = x.shape
    if not 1 <= L <= min(n, f):
        raise ValueError(f"L must satisfy 1 <= L <= min(N, F) (got L={L}, shape {x.shape})")
    if _is_zero(x):
        eye_n, eye_f = np.eye(n, L), np.eye(f, L)
        return SvdBasis(eye_n, np.zeros(L), eye_f, degenerate=True)
    if max_iter is None:
        max_iter = default_max_iter(L, min(n, f))
    if method == "auto":
        method = "dense" if (min(n, f) <= DENSE_CUTOFF or L >= min(n, f) - 1) else "lanczos"
    if method == "lanczos" and L >= min(n, f) - 1:
        method = "dense"

    if method == "dense":
        dense = _as_dense(x, f)
        u, s, wt = np.linalg.svd(dense, full_matrices=False)
        u, s, w = u[:, :L], s[:L], wt[:L].T
    elif method == "lanczos":
        u, s, w = _gram_lanczos_svd(x, L, tol, max_iter, seed)
    else:
        raise ValueError(f"unknown method {method!r}")

    u, w = canonicalize_signs(u, w)
    s = np.array(s)
    if s[0] == 0.0:
        return SvdBasis(u, s, w, degenerate=True)
    xw, xtu = _apply(x, w), _apply_t(x, u)
    res = np.maximum(
        np.linalg.norm(np.asarray(xw) - u * s, axis=0),
        np.linalg.norm(np.asarray(xtu) - w * s, axis=0),
    )
    if np.any(res > tol * s[0]):
        raise ConvergenceError(f"singular triplet residual above tolerance {tol:g}", float(np.max(res) / s[0]))
    return SvdBasis(u, s, w)


def _apply(x, v):
    out = x.matmat(v) if isinstance(x, LinearOperator) else x @ v
    return np.asarray(out)


def _apply_t(x, v):
    out = x.rmatmat(v) if isinstance(x, LinearOperator) else x.T @ v
    return np.asarray(out)


GRAM_EXPLICIT_MAX = 4096


def _gram(x, transpose):
    """Gram matrix on the smaller side, explicit when that is cheap."""
    small = x.shape[0] if transpose else x.shape[1]
    if small <= GRAM_EXPLICIT_MAX and not isinstance(x, LinearOperator):
        g = (x @ x.T) if transpose else (x.T @ x)
        g = g.toarray() if sp.issparse(g) else np.asarray(g)
        return (g + g.T) / 2.0
    if transpose:
        return LinearOperator((small, small), matvec=lambda v: _apply(x, _apply_t(x, v)), dtype=np.float64)
    return LinearOperator((small, small), matvec=lambda v: _apply_t(x, _apply(x, v)), dtype=np.float64)


def _gram_lanczos_svd(x, L, tol, max_iter, seed):
    """Singular triplets from Lanczos on ``x^T x`` (or ``x x^T`` when N < F)."""
    n, f = x.shape
    transpose = n < f
    g = _gram(x, transpose)
    small = g.shape[0]
    v0 = np.random.default_rng(seed).standard_normal(small)
    try:
        vals, vecs = eigsh(g, k=L, which="LA", v0=v0, tol=tol / 100.0, maxiter=max_iter)
    except ArpackNoConvergence:
        raise ConvergenceError(f"Lanczos SVD did not converge for L={L}") from None
    # Rayleigh-Ritz on the Ritz subspace: singular values accurate to eps * s_1
    # instead of the sqrt(eps) floor of the Gram eigenvalues.
    if transpose:
        q, _ = np.linalg.qr(_apply_t(x, vecs))
        ub, s, wbt = np.linalg.svd(_apply(x, q), full_matrices=False)
        return ub, s, q @ wbt.T
    q, _ = np.linalg.qr(_apply(x, vecs))
    ub, s, wbt = np.linalg.svd(_apply_t(x, q).T, full_matrices=False)
    return q @ ub, s, wbt.T


def synthesize(vectors, values) -> np.ndarray:
    """Dense ``sum_i values[i] v_i v_i^T``; exactly symmetric by construction."""
    vectors = np.asarray(vectors, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    if vectors.shape[1] != values.shape[0]:
        raise ValueError("number of vectors and values differ")
    m = (vectors * values) @ vectors.T
    return (m + m.T) / 2.0
