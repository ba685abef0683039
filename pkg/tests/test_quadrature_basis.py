import numpy as np
import pytest

from sievecred import DEFAULT_RULE, basis_matrix, eval_series, gauss_legendre_rule, midpoint_design
from sievecred.quadrature import interval_rule


def test_rule_has_512_nodes_on_unit_interval():
    assert DEFAULT_RULE.nodes.size == 512
    assert DEFAULT_RULE.nodes.min() > 0 and DEFAULT_RULE.nodes.max() < 1
    assert DEFAULT_RULE.integrate(np.ones(512)) == pytest.approx(1.0, abs=1e-14)


def test_rule_integrates_polynomials_exactly():
    # 4-point Gauss-Legendre is exact through degree 7 on each cell
    for p in range(8):
        exact = 1.0 / (p + 1)
        assert DEFAULT_RULE.integrate(DEFAULT_RULE.nodes**p) == pytest.approx(exact, abs=1e-14)


def test_rule_integrates_smooth_functions():
    val = DEFAULT_RULE.integrate(np.exp(np.sin(2 * np.pi * DEFAULT_RULE.nodes)))
    # independent check: fine trapezoid
    x = np.linspace(0, 1, 200001)
    ref = np.trapezoid(np.exp(np.sin(2 * np.pi * x)), x)
    assert val == pytest.approx(ref, abs=1e-10)


def test_interval_rule():
    x, w = interval_rule(0.25, 0.5, order=8)
    assert w.sum() == pytest.approx(0.25, abs=1e-15)
    assert (w @ x**3) == pytest.approx((0.5**4 - 0.25**4) / 4, abs=1e-15)


@pytest.mark.parametrize("tag", ["trigonometric", "cosine"])
def test_basis_orthonormal_in_l2(tag):
    phi = basis_matrix(DEFAULT_RULE.nodes, 12, tag)
    gram = (phi * DEFAULT_RULE.weights[:, None]).T @ phi
    assert np.allclose(gram, np.eye(12), atol=1e-12)


@pytest.mark.parametrize("tag", ["trigonometric", "cosine"])
def test_basis_integrates_to_zero(tag):
    phi = basis_matrix(DEFAULT_RULE.nodes, 12, tag)
    assert np.allclose(DEFAULT_RULE.weights @ phi, 0.0, atol=1e-13)


def test_eval_series_matches_matrix_product():
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(700)
    x = rng.random(50)
    direct = basis_matrix(x, 700, "trigonometric") @ coeffs
    assert np.allclose(eval_series(x, coeffs, chunk=128), direct, atol=1e-11)


def test_midpoint_design_gram_is_identity():
    # discrete Fourier orthogonality up to k = n/2
    design = midpoint_design(64, "trigonometric", k_design=32)
    gram = design.gram(32)
    assert np.max(np.abs(gram - np.eye(32))) < 1e-8
    assert design.c0 < 1 + 1e-8


def test_midpoint_design_certifies_and_rejects():
    design = midpoint_design(100, "trigonometric", k_design=40)
    assert design.k_design == 40
    with pytest.raises(ValueError):
        design.phi(41)


def test_cosine_design_well_conditioned():
    design = midpoint_design(50, "cosine", k_design=30)
    assert design.c0 < 1 + 1e-8
