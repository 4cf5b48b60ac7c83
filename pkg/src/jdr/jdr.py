"""Joint denoising and rewiring by eigenvector interpolation.

Each iteration decomposes the current graph operator and feature operator,
pulls the leading eigenvectors of the graph towards their best-matching
left singular vectors of the features (and vice versa), and re-synthesizes
both. Only the leading part of each spectrum is replaced; the remainder of
the original matrices is carried along exactly as a sparse (or dense)
base plus a low-rank correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .alignment import AlignmentReport, alignment
from .graph import Dataset, Graph, row_top_k, union_of_selections
from .spectral import BY_VALUE, ORDERINGS, ConvergenceError, SpectralBasis, SvdBasis, eigs_top, svd_top

__all__ = [
    "JdrConfig",
    "JdrOutput",
    "Match",
    "AdjacencyOperator",
    "FeatureOperator",
    "interpolate_basis",
    "rewire_step",
    "denoise_step",
    "jdr_run",
    "update_A",
    "update_X",
    "measure_alignment",
]

log = logging.getLogger(__name__)

JACOBI = "jacobi"
GAUSS_SEIDEL = "gauss_seidel"
# dense feature materialization is used for the solver up to this many entries
DENSE_FEATURE_LIMIT = 50_000_000


@dataclass(frozen=True)
class JdrConfig:
    """Hyperparameters of a JDR run.

    A side whose rate is zero (or whose ``L`` is ``None``) is inactive:
    ``eta_A = 0`` leaves the graph untouched, ``eta_X1 = 0`` the features.
    ``eta_X2`` blends original and denoised features after the loop.
    """

    K: int = 10
    L_A: int | None = 1
    L_X: int | None = 1
    eta_A: float = 0.0
    eta_X1: float = 0.0
    eta_X2: float = 0.0
    top_k: int = 64
    ordering: str = BY_VALUE
    binarize_features: bool = False
    tol: float = 1e-8
    max_iter: int | None = None
    seed: int = 0
    update_order: str = JACOBI
    trace_L: int | None = None
    block_size: int = 1024
    solver: str = "auto"
    renormalize: bool = False

    def __post_init__(self):
        for name in ("eta_A", "eta_X1", "eta_X2"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.eta_A > 0 and (self.L_A is None or self.L_A < 1):
            raise ValueError("L_A must be >= 1 when eta_A > 0")
        if self.eta_X1 > 0 and (self.L_X is None or self.L_X < 1):
            raise ValueError("L_X must be >= 1 when eta_X1 > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.update_order not in (JACOBI, GAUSS_SEIDEL):
            raise ValueError(f"update_order must be {JACOBI!r} or {GAUSS_SEIDEL!r}")

    @property
    def rewire_active(self) -> bool:
        return self.eta_A > 0 and bool(self.L_A)

    @property
    def denoise_active(self) -> bool:
        return self.eta_X1 > 0 and bool(self.L_X)

    def resolve_trace_L(self, dataset: Dataset) -> int:
        if self.trace_L is not None:
            L = self.trace_L
        elif dataset.n_classes is not None:
            L = dataset.n_classes
        else:
            L = min(max(self.L_A or 1, self.L_X or 1), 16)
        return max(1, min(L, dataset.n_nodes, dataset.n_features))


@dataclass(frozen=True)
class Match:
    """One interpolation pairing: ``target`` was pulled towards ``sign * source``."""

    iteration: int
    side: str  # "graph" or "features"
    target: int
    source: int
    sign: float


class AdjacencyOperator(LinearOperator):
    """Symmetric operator ``base + Q diag(c) Q^T`` with sparse (or dense) ``base``."""

    def __init__(self, base, factors=None, coeffs=None):
        n = base.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))
        self.base = base
        self.factors = np.zeros((n, 0)) if factors is None else factors
        self.coeffs = np.zeros(0) if coeffs is None else coeffs

    @property
    def rank(self) -> int:
        return self.coeffs.shape[0]

    def _matmat(self, x):
        out = np.asarray(self.base @ x, dtype=np.float64)
        if self.rank:
            out = out + self.factors @ (self.coeffs[:, None] * (self.factors.T @ x))
        return out

    def _matvec(self, x):
        return self._matmat(np.asarray(x).reshape(-1, 1)).ravel()

    def _rmatvec(self, x):
        return self._matvec(x)

    def _adjoint(self):
        return self

    def with_update(self, old_vectors, new_vectors, values) -> "AdjacencyOperator":
        """Add ``sum_i values[i] (new_i new_i^T - old_i old_i^T)``."""
        factors = np.hstack([self.factors, old_vectors, new_vectors])
        coeffs = np.concatenate([self.coeffs, -values, values])
        return AdjacencyOperator(self.base, factors, coeffs)

    def rows(self, start: int, stop: int) -> np.ndarray:
        """Dense rows ``start:stop`` of the operator."""
        block = self.base[start:stop]
        block = block.toarray() if sp.issparse(block) else np.array(block, dtype=np.float64)
        if self.rank:
            block = block + (self.factors[start:stop] * self.coeffs) @ self.factors.T
        return block

    def to_dense(self) -> np.ndarray:
        return self.rows(0, self.shape[0])


class FeatureOperator(LinearOperator):
    """Feature matrix ``base + P R^T`` kept as the original plus a low-rank correction."""

    def __init__(self, base, left=None, right=None, _dense=None):
        n, f = base.shape
        super().__init__(dtype=np.float64, shape=(n, f))
        self.base = base
        self.left = np.zeros((n, 0)) if left is None else left
        self.right = np.zeros((f, 0)) if right is None else right
        self._dense = _dense

    @property
    def rank(self) -> int:
        return self.left.shape[1]

    def _matmat(self, x):
        out = np.asarray(self.base @ x, dtype=np.float64)
        if self.rank:
            out = out + self.left @ (self.right.T @ x)
        return out

    def _matvec(self, x):
        return self._matmat(np.asarray(x).reshape(-1, 1)).ravel()

    def _rmatmat(self, x):
        out = np.asarray(self.base.T @ x, dtype=np.float64)
        if self.rank:
            out = out + self.right @ (self.left.T @ x)
        return out

    def _rmatvec(self, x):
        return self._rmatmat(np.asarray(x).reshape(-1, 1)).ravel()

    def correction(self) -> np.ndarray:
        return self.left @ self.right.T

    def with_update(self, delta_left, right) -> "FeatureOperator":
        dense = None
        if self._dense is not None:
            dense = self._dense + delta_left @ right.T
        return FeatureOperator(
            self.base, np.hstack([self.left, delta_left]), np.hstack([self.right, right]), dense
        )

    def to_dense(self) -> np.ndarray:
        if self._dense is None:
            base = self.base.toarray() if sp.issparse(self.base) else np.array(self.base, dtype=np.float64)
            self._dense = base + self.correction() if self.rank else base
        return self._dense

    def solver_view(self):
        """What the SVD routine should see: the dense matrix when it is affordable."""
        n, f = self.shape
        if n * f <= DENSE_FEATURE_LIMIT:
            return self.to_dense()
        return self


def interpolate_basis(target, source, eta: float, renormalize: bool = False):
    """Pull each target column towards its best-matching source column.

    For every target column ``t_i`` the source ``s_j`` maximizing
    ``|<t_i, s_j>|`` is chosen (first index on ties, sources may be reused)
    and ``(1 - eta) t_i + eta * sign(<t_i, s_j>) s_j`` is returned. A zero
    inner product counts as sign +1. Results are rescaled to unit norm only
    when ``renormalize`` is set.

    Returns
    -------
    new : ndarray, same shape as ``target``
    matches : list of (i, j, sign)
    """
    target = np.asarray(target, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    if target.ndim == 1:
        target = target[:, None]
    if source.ndim == 1:
        source = source[:, None]
    if target.shape[0] != source.shape[0]:
        raise ValueError("target and source vectors differ in length")
    inner = target.T @ source
    j = np.argmax(np.abs(inner), axis=1)
    signs = np.where(inner[np.arange(inner.shape[0]), j] < 0, -1.0, 1.0)
    new = (1.0 - eta) * target + eta * (source[:, j] * signs)
    if renormalize:
        new /= np.linalg.norm(new, axis=0)
    matches = [(int(i), int(jj), float(s)) for i, (jj, s) in enumerate(zip(j, signs))]
    return new, matches


def rewire_step(a_op: AdjacencyOperator, a_basis: SpectralBasis, x_basis: SvdBasis, eta: float, renormalize=False):
    """One graph update ``A + sum_i lam_i (v~_i v~_i^T - v_i v_i^T)``.

    ``a_basis`` holds the ``L_A`` eigenpairs being replaced and ``x_basis``
    the ``L_A`` left singular vectors they may be pulled towards.
    """
    if eta == 0.0:
        return a_op, []
    new, matches = interpolate_basis(a_basis.vectors, x_basis.left, eta, renormalize)
    return a_op.with_update(a_basis.vectors, new, a_basis.values), matches


def denoise_step(x_op: FeatureOperator, x_basis: SvdBasis, a_basis: SpectralBasis, eta: float, renormalize=False):
    """One feature update ``X + sum_i s_i (u~_i - u_i) w_i^T``."""
    if eta == 0.0:
        return x_op, []
    new, matches = interpolate_basis(x_basis.left, a_basis.vectors, eta, renormalize)
    delta = (new - x_basis.left) * x_basis.values
    return x_op.with_update(delta, x_basis.right), matches


def update_A(a_op, top_k: int, block_size: int = 1024) -> Graph:
    """Densify the operator in row blocks and keep the ``top_k`` entries per node."""
    n = a_op.shape[0]
    parts = [row_top_k(a_op.rows(s, min(s + block_size, n)), s, top_k) for s in range(0, n, block_size)]
    return union_of_selections(parts, n)


def update_X(x_op, x_original, eta: float, binarize: bool = False):
    """Blend ``(1 - eta) X + eta X~`` and optionally threshold at 0.5."""
    if eta == 0.0:
        out = x_original
    else:
        correction = x_op.correction() if isinstance(x_op, FeatureOperator) else np.asarray(x_op) - _dense(x_original)
        if eta == 1.0 and isinstance(x_op, FeatureOperator):
            out = x_op.to_dense()
        else:
            out = _dense(x_original) + eta * correction
    if binarize:
        out = (_dense(out) >= 0.5).astype(np.float64)
    return out


def _dense(x):
    return x.toarray() if sp.issparse(x) else np.asarray(x, dtype=np.float64)


def measure_alignment(adjacency, features, L: int, cfg: JdrConfig | None = None) -> AlignmentReport:
    """Alignment of a graph matrix and a feature matrix at ``L``."""
    cfg = cfg or JdrConfig()
    a_basis = eigs_top(adjacency, L, cfg.ordering, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver)
    x_basis = svd_top(features, L, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver)
    return alignment(a_basis, x_basis, L)


@dataclass
class JdrOutput:
    rewired_graph: Graph
    denoised_features: np.ndarray
    alignment_trace: np.ndarray
    matchings: list = field(default_factory=list)
    adjacency_operator: AdjacencyOperator | None = None
    feature_operator: FeatureOperator | None = None


def _is_all_zero(x):
    return x.count_nonzero() == 0 if sp.issparse(x) else not np.any(x)


def jdr_run(dataset: Dataset, cfg: JdrConfig) -> JdrOutput:
    """Run ``cfg.K`` JDR iterations on ``dataset`` followed by the update steps.

    Both decompositions of an iteration are taken from the same iterate
    (Jacobi order) unless ``cfg.update_order == "gauss_seidel"``, in which
    case the graph update sees the freshly denoised features.
    """
    x0 = dataset.features
    if _is_all_zero(x0):
        raise ValueError("features are all zero; JDR needs informative features")
    n, f = x0.shape
    a_op = AdjacencyOperator(dataset.graph.symmetric().astype(np.float64))
    x_op = FeatureOperator(x0)
    trace_L = cfg.resolve_trace_L(dataset)
    need = [trace_L]
    if cfg.rewire_active:
        need.append(cfg.L_A)
    if cfg.denoise_active:
        need.append(cfg.L_X)
    La = min(max(need), n)
    Lx = min(max(need), n, f)

    def decompose(it, a, x, which=("a", "x")):
        try:
            ab = eigs_top(a, La, cfg.ordering, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver) if "a" in which else None
            xb = svd_top(x.solver_view(), Lx, cfg.tol, cfg.max_iter, cfg.seed, cfg.solver) if "x" in which else None
        except ConvergenceError as err:
            raise ConvergenceError(f"iteration {it}: {err}", err.residual) from err
        return ab, xb

    trace = []
    matchings = []
    for it in range(cfg.K + 1):
        a_basis, x_basis = decompose(it, a_op, x_op)
        trace.append(alignment(a_basis, x_basis, min(trace_L, La, Lx)).value)
        log.debug("iteration %d alignment %.6f", it, trace[-1])
        if it == cfg.K:
            break
        new_x = x_op
        if cfg.denoise_active:
            lx = min(cfg.L_X, Lx, La)
            new_x, m = denoise_step(x_op, x_basis.head(lx), a_basis.head(lx), cfg.eta_X1, cfg.renormalize)
            matchings += [Match(it, "features", i, j, s) for i, j, s in m]
        new_a = a_op
        if cfg.rewire_active:
            if cfg.update_order == GAUSS_SEIDEL and new_x is not x_op:
                _, x_basis = decompose(it, a_op, new_x, which=("x",))
            la = min(cfg.L_A, La, Lx)
            new_a, m = rewire_step(a_op, a_basis.head(la), x_basis.head(la), cfg.eta_A, cfg.renormalize)
            matchings += [Match(it, "graph", i, j, s) for i, j, s in m]
        a_op, x_op = new_a, new_x

    graph = update_A(a_op, cfg.top_k, cfg.block_size)
    features = update_X(x_op, x0, cfg.eta_X2, cfg.binarize_features)
    return JdrOutput(graph, features, np.array(trace), matchings, a_op, x_op)
