"""Contextual stochastic block models and their Gaussian surrogates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Dataset, Graph

__all__ = [
    "CsbmParams",
    "SpikedPair",
    "phi_to_lambda_mu",
    "lambda_mu_to_phi",
    "sample_csbm",
    "sample_spiked_pair",
    "sample_gaussian_csbm_nonsym",
    "balanced_signs",
]

# named sub-streams of a root seed
_STREAM_LABELS, _STREAM_GRAPH, _STREAM_FEATURES, _STREAM_NOISE = 0, 1, 2, 3


def _rng(seed, stream):
    return np.random.default_rng([int(seed), stream])


def phi_to_lambda_mu(phi: float, epsilon: float, gamma: float) -> tuple[float, float]:
    """Graph SNR ``lambda`` and squared feature SNR ``mu^2`` on the ellipse.

    Solves ``lambda^2 + mu^2 / gamma = 1 + epsilon`` together with
    ``phi = (2/pi) arctan(lambda sqrt(gamma) / mu)``, taking ``mu >= 0``.
    """
    if abs(phi) > 1:
        raise ValueError(f"|phi| must be <= 1, got {phi}")
    if epsilon <= -1:
        raise ValueError("epsilon must exceed -1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    angle = phi * math.pi / 2
    lam = math.sqrt(1 + epsilon) * math.sin(angle)
    mu_sq = gamma * (1 + epsilon) * math.cos(angle) ** 2
    return lam, mu_sq


def lambda_mu_to_phi(lam: float, mu: float, gamma: float) -> float:
    return 2 / math.pi * math.atan2(lam * math.sqrt(gamma), mu)


@dataclass(frozen=True)
class CsbmParams:
    """Parameters of a two-class cSBM.

    ``mu`` is the feature SNR whose square is the tabulated ``mu^2``; the
    features are ``X_i = sqrt(mu / N) y_i xi + z_i / sqrt(F)``.
    """

    n: int
    f: int
    d: float
    lam: float
    mu: float
    seed: int = 0

    def __post_init__(self):
        if self.c_in < 0 or self.c_out < 0:
            raise ValueError(
                f"invalid cSBM: c_in={self.c_in:.4g}, c_out={self.c_out:.4g} must be >= 0"
            )
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if max(self.c_in, self.c_out) > self.n:
            raise ValueError("edge probabilities exceed 1; increase n or lower d")

    @classmethod
    def from_phi(cls, phi, n=5000, f=2000, d=5.0, epsilon=3.25, seed=0) -> "CsbmParams":
        lam, mu_sq = phi_to_lambda_mu(phi, epsilon, n / f)
        return cls(n, f, d, lam, math.sqrt(mu_sq), seed)

    @property
    def gamma(self) -> float:
        return self.n / self.f

    @property
    def c_in(self) -> float:
        return self.d + self.lam * math.sqrt(self.d)

    @property
    def c_out(self) -> float:
        return self.d - self.lam * math.sqrt(self.d)

    @property
    def phi(self) -> float:
        return lambda_mu_to_phi(self.lam, self.mu, self.gamma)

    @property
    def epsilon(self) -> float:
        return self.lam**2 + self.mu**2 / self.gamma - 1


def balanced_signs(n: int) -> np.ndarray:
    """First half -1, second half +1."""
    return np.where(np.arange(n) < n // 2, -1.0, 1.0)


def _sample_sbm_upper(y, p_in, p_out, rng, chunk=256):
    """Independent edges for i < j with probability p_in (same sign) or p_out."""
    n = y.size
    rows, cols = [], []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        u = rng.random((stop - start, n))
        same = y[start:stop, None] == y[None, :]
        hit = u < np.where(same, p_in, p_out)
        hit &= np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        r, c = np.nonzero(hit)
        rows.append(r + start)
        cols.append(c)
    return np.concatenate(rows), np.concatenate(cols)


def sample_csbm(p: CsbmParams) -> Dataset:
    """Draw a graph, features and labels from the cSBM.

    Labels are laid out as first half -1, second half +1 and then node ids
    are shuffled by the seed. Stored class ids are 0 (for -1) and 1 (for +1).
    The graph has no self-loops and is not conditioned on connectivity.
    """
    n, f = p.n, p.f
    y = balanced_signs(n)
    r, c = _sample_sbm_upper(y, p.c_in / n, p.c_out / n, _rng(p.seed, _STREAM_GRAPH))
    rng_x = _rng(p.seed, _STREAM_FEATURES)
    xi = rng_x.normal(0.0, 1.0 / math.sqrt(f), size=f)
    z = rng_x.standard_normal((n, f))
    x = math.sqrt(p.mu / n) * np.outer(y, xi) + z / math.sqrt(f)

    perm = _rng(p.seed, _STREAM_LABELS).permutation(n)  # old id -> new id
    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    rows, cols = perm[r], perm[c]
    adj = sp.csr_matrix(
        (np.ones(2 * rows.size), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    )
    adj.sort_indices()
    labels = ((y[inv] + 1) // 2).astype(np.int64)
    n_components = sp.csgraph.connected_components(adj, directed=False)[0]
    meta = {
        "phi": p.phi, "lambda": p.lam, "mu": p.mu, "d": p.d, "seed": p.seed,
        "n_components": int(n_components),
    }
    return Dataset(Graph(n, adj), x[inv], labels, 2, name=f"csbm_phi{p.phi:+.3f}", meta=meta)


@dataclass(frozen=True)
class SpikedPair:
    """Spiked GOE adjacency and spiked Gaussian features sharing labels ``y``."""

    a_c: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lam: float
    mu: float

    @property
    def gamma(self) -> float:
        return self.x.shape[0] / self.x.shape[1]

    @property
    def y_unit(self) -> np.ndarray:
        return self.y / math.sqrt(self.y.size)


def goe(n: int, rng) -> np.ndarray:
    """GOE matrix: off-diagonal variance 1, diagonal variance 2."""
    g = rng.standard_normal((n, n))
    return (g + g.T) / math.sqrt(2.0)


def sample_spiked_pair(n: int, f: int, lam: float, mu: float, seed: int = 0, with_features=True) -> SpikedPair:
    """``A^c = (lam/N) y y^T + O_A / sqrt(N)`` and ``X = sqrt(mu/N) y xi^T + O_X / sqrt(F)``."""
    if n < 2 or f < 2:
        raise ValueError("n and f must be >= 2")
    y = _rng(seed, _STREAM_LABELS).permutation(balanced_signs(n))
    a = goe(n, _rng(seed, _STREAM_GRAPH)) / math.sqrt(n)
    a += (lam / n) * np.outer(y, y)
    if with_features:
        rng_x = _rng(seed, _STREAM_FEATURES)
        xi = rng_x.normal(0.0, 1.0 / math.sqrt(f), size=f)
        x = math.sqrt(mu / n) * np.outer(y, xi) + rng_x.standard_normal((n, f)) / math.sqrt(f)
    else:
        x = np.zeros((n, f))
    return SpikedPair(a, x, y, lam, mu)


def sample_gaussian_csbm_nonsym(n: int, f: int, lam: float, mu: float, seed: int = 0):
    """Non-symmetric Gaussian cSBM equivalent used for the ridge-regression study.

    ``A = (lam/N) y y^T + Xi_A`` and ``X = (mu/N) y u^T + Xi_X`` with
    ``u ~ N(0, I_F)`` and noise entries of variance ``1/N``.
    """
    y = _rng(seed, _STREAM_LABELS).permutation(balanced_signs(n))
    rng = _rng(seed, _STREAM_NOISE)
    a = (lam / n) * np.outer(y, y) + rng.standard_normal((n, n)) / math.sqrt(n)
    u = rng.standard_normal(f)
    x = (mu / n) * np.outer(y, u) + rng.standard_normal((n, f)) / math.sqrt(n)
    return a, x, y
