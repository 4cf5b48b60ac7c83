import math

import numpy as np
import pytest

from jdr.csbm import (
    CsbmParams,
    balanced_signs,
    lambda_mu_to_phi,
    phi_to_lambda_mu,
    sample_csbm,
    sample_gaussian_csbm_nonsym,
    sample_spiked_pair,
)
from jdr.graph import edge_homophily

# phi, mu^2, lambda as tabulated for epsilon=3.25, gamma=2.5
TABLE6 = [
    (-1.0, 0.0, -2.06), (-0.875, 0.40, -2.02), (-0.75, 1.56, -1.90), (-0.625, 3.28, -1.71),
    (-0.5, 5.31, -1.46), (-0.375, 7.35, -1.15), (-0.25, 9.07, -0.79), (-0.125, 10.22, -0.40),
    (0.0, 10.63, 0.0), (0.125, 10.22, 0.40), (0.25, 9.07, 0.79), (0.375, 7.35, 1.15),
    (0.5, 5.31, 1.46), (0.625, 3.28, 1.71), (0.75, 1.56, 1.90), (0.875, 0.40, 2.02),
    (1.0, 0.0, 2.06),
]


@pytest.mark.parametrize("phi, mu_sq, lam", TABLE6)
def test_table6_rows(phi, mu_sq, lam):
    got_lam, got_mu_sq = phi_to_lambda_mu(phi, 3.25, 2.5)
    # two-decimal agreement, half-up (10.625 is tabulated as 10.63)
    assert abs(got_lam - lam) <= 0.005 + 1e-9
    assert abs(got_mu_sq - mu_sq) <= 0.005 + 1e-9


@pytest.mark.parametrize("phi", np.linspace(-0.99, 0.99, 11))
def test_phi_round_trip(phi):
    lam, mu_sq = phi_to_lambda_mu(phi, 3.25, 2.5)
    assert lam**2 + mu_sq / 2.5 == pytest.approx(4.25)
    assert lambda_mu_to_phi(lam, math.sqrt(mu_sq), 2.5) == pytest.approx(phi, abs=1e-12)


def test_phi_validation():
    with pytest.raises(ValueError):
        phi_to_lambda_mu(1.5, 3.25, 2.5)


def test_negative_c_out_rejected():
    with pytest.raises(ValueError, match="c_out"):
        CsbmParams(n=100, f=40, d=1.0, lam=2.0, mu=1.0)


def test_params_properties():
    p = CsbmParams.from_phi(0.5, n=5000, f=2000)
    assert p.gamma == 2.5
    assert p.phi == pytest.approx(0.5)
    assert p.epsilon == pytest.approx(3.25)
    assert p.c_in + p.c_out == pytest.approx(10.0)


def test_balanced_signs():
    assert balanced_signs(4).tolist() == [-1, -1, 1, 1]


def test_sample_csbm_structure():
    d = sample_csbm(CsbmParams.from_phi(0.3, n=400, f=100, seed=2))
    assert np.bincount(d.labels).tolist() == [200, 200]
    assert d.labels[:200].sum() not in (0, 200)  # shuffled
    a = d.graph.adjacency
    assert a.diagonal().sum() == 0 and abs(a - a.T).max() == 0
    assert set(np.unique(a.data)) == {1.0}
    assert d.features.shape == (400, 100)


def test_sample_csbm_deterministic():
    p = CsbmParams.from_phi(-0.4, n=300, f=60, seed=9)
    a, b = sample_csbm(p), sample_csbm(p)
    assert (a.graph.adjacency != b.graph.adjacency).nnz == 0
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


def test_edge_count_binomial():
    d = sample_csbm(CsbmParams.from_phi(0.2, n=5000, f=20, d=5, seed=4))
    assert abs(d.graph.n_edges - 12500) <= 4 * math.sqrt(12500)


def test_homophily_direction():
    hom = sample_csbm(CsbmParams.from_phi(0.75, n=2000, f=20, seed=1))
    het = sample_csbm(CsbmParams.from_phi(-0.75, n=2000, f=20, seed=1))
    assert edge_homophily(hom.graph, hom.labels) > 0.85
    assert edge_homophily(het.graph, het.labels) < 0.15


def test_spiked_pair_noise_moments():
    n = 800
    p = sample_spiked_pair(n, 300, 0.0, 0.0, seed=3)
    a = p.a_c * math.sqrt(n)
    off = a[np.triu_indices(n, 1)]
    assert np.array_equal(p.a_c, p.a_c.T)
    assert off.var() == pytest.approx(1.0, rel=0.02)
    assert np.diag(a).var() == pytest.approx(2.0, rel=0.15)
    assert (p.x * math.sqrt(300)).var() == pytest.approx(1.0, rel=0.02)
    assert np.abs(p.y).tolist() == [1.0] * n and p.y.sum() == 0


def test_nonsym_noise_norm():
    a, x, y = sample_gaussian_csbm_nonsym(1000, 500, 0.0, 0.0, seed=0)
    assert np.linalg.norm(a, 2) <= 3.0
    assert a.shape == (1000, 1000) and x.shape == (1000, 500)


def test_bbp_overlap_small():
    # reduced-size version of the BBP oracle; theory 1 - 1/lambda^2 = 0.75
    vals = []
    for s in range(4):
        p = sample_spiked_pair(1500, 10, 2.0, 0.0, seed=s, with_features=False)
        w, v = np.linalg.eigh(p.a_c)
        vals.append((v[:, -1] @ p.y_unit) ** 2)
    assert np.mean(vals) == pytest.approx(0.75, abs=0.06)
