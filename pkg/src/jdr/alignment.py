"""Graph-feature alignment: principal angles between leading subspaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralBasis, SvdBasis

__all__ = ["AlignmentReport", "alignment", "subspace_cosines", "alignment_sweep"]

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class AlignmentReport:
    """Cosines of the principal angles between two L-dimensional subspaces.

    ``value`` is the largest cosine, i.e. the spectral norm of ``V_L^T U_L``.
    """

    L: int
    value: float
    principal_angle_cosines: np.ndarray


def _orthonormal(b: np.ndarray) -> np.ndarray:
    gram = b.T @ b
    if np.max(np.abs(gram - np.eye(b.shape[1]))) <= _ORTHO_TOL:
        return b
    q, _ = np.linalg.qr(b)
    return q


def subspace_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal-angle cosines between span(a) and span(b), descending."""
    a = _orthonormal(np.asarray(a, dtype=np.float64))
    b = _orthonormal(np.asarray(b, dtype=np.float64))
    return np.linalg.svd(a.T @ b, compute_uv=False)


def _columns(basis):
    if isinstance(basis, SpectralBasis):
        return basis.vectors
    if isinstance(basis, SvdBasis):
        return basis.left
    return np.asarray(basis)


def alignment(va, ux, L: int) -> AlignmentReport:
    """Alignment of the first ``L`` eigenvectors of A with the first ``L`` left singular vectors of X.

    ``va`` and ``ux`` may be :class:`SpectralBasis`/:class:`SvdBasis` objects
    or plain ``N x L'`` arrays. Bases that are not orthonormal (e.g. after
    interpolation) are orthonormalized before measuring.
    """
    v, u = _columns(va), _columns(ux)
    if v.ndim == 1:
        v = v[:, None]
    if u.ndim == 1:
        u = u[:, None]
    if v.shape[0] != u.shape[0]:
        raise ValueError(f"bases live in different dimensions ({v.shape[0]} vs {u.shape[0]})")
    if L < 1 or L > v.shape[1] or L > u.shape[1]:
        raise ValueError(f"L={L} exceeds available columns ({v.shape[1]}, {u.shape[1]})")
    cos = subspace_cosines(v[:, :L], u[:, :L])
    return AlignmentReport(L, float(cos[0]), cos)


def alignment_sweep(dataset, L: int | None = None, jdr_config=None):
    """Alignment before (and after, if a JDR config is given) as ``[(condition, value)]``.

    "after" measures the rewired, sparsified graph against the denoised features.
    """
    # local import: jdr depends on this module
    from .jdr import JdrConfig, jdr_run, measure_alignment

    cfg = jdr_config if jdr_config is not None else JdrConfig(K=0, eta_A=0.0, eta_X1=0.0)
    if L is None:
        L = cfg.resolve_trace_L(dataset)
    rows = [("before", measure_alignment(dataset.graph.symmetric(), dataset.features, L, cfg).value)]
    if jdr_config is not None:
        out = jdr_run(dataset, jdr_config)
        after = measure_alignment(out.rewired_graph.symmetric(), out.denoised_features, L, cfg)
        rows.append(("after", after.value))
    return rows
