import numpy as np
import pytest
from scipy.special import logsumexp

from sievecred import (
    default_k_cap,
    dirichlet_prior,
    gaussian_prior,
    hyper_log_mass,
    hyper_prior,
    laplace_prior,
    log_prior_density,
    prior_from_config,
    sample_prior,
)
from sievecred.priors import GSpec, check_g_envelope, hyper_envelope_report


def test_standard_normal_at_zero():
    assert log_prior_density(gaussian_prior(), np.array([0.0])) == pytest.approx(
        -np.log(np.sqrt(2 * np.pi))
    )


def test_flat_dirichlet_density_is_one():
    prior = dirichlet_prior(1.0)
    for t in (0.1, 0.5, 0.93):
        assert log_prior_density(prior, np.array([t, 1 - t])) == pytest.approx(0.0, abs=1e-12)


def test_laplace_density_product_closed_form():
    prior = laplace_prior(scale=0.7)
    theta = np.array([0.3, -1.2, 2.0])
    direct = sum(-np.log(2 * 0.7) - abs(t) / 0.7 for t in theta)
    assert log_prior_density(prior, theta) == pytest.approx(direct, abs=1e-12)


def test_simplex_violations_rejected():
    prior = dirichlet_prior(1.0)
    with pytest.raises(ValueError):
        log_prior_density(prior, np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        log_prior_density(prior, np.array([-0.1, 1.1]))


def test_gaussian_sampling_moments():
    draws = sample_prior(gaussian_prior(), k=3, count=100_000, seed=0)
    assert np.all(np.abs(draws.mean(axis=0)) < 4 / np.sqrt(100_000))


def test_dirichlet_sampling_mean():
    draws = sample_prior(dirichlet_prior(1.0), k=3, count=100_000, seed=1)
    assert np.allclose(draws.mean(axis=0), 1 / 3, atol=4 * np.sqrt(2 / 9 / 100_000))


def test_laplace_sampling_variance():
    b = 0.8
    draws = sample_prior(laplace_prior(scale=b), k=1, count=100_000, seed=2)
    assert draws.var() == pytest.approx(2 * b**2, rel=0.05)


def test_prior_mass_integrates_to_one():
    # k = 1 by quadrature, k = 2 by a tensor grid, both within 1e-3
    xs = np.linspace(-12, 12, 4001)
    dx = xs[1] - xs[0]
    for prior in (gaussian_prior(), laplace_prior(scale=0.5)):
        mass1 = np.exp([log_prior_density(prior, np.array([x])) for x in xs]).sum() * dx
        assert mass1 == pytest.approx(1.0, abs=1e-3)
        g = np.exp(prior.g.logpdf(xs))
        mass2 = (np.outer(g, g)).sum() * dx * dx
        assert mass2 == pytest.approx(1.0, abs=1e-3)
    # Dirichlet(2, 1) on the simplex edge parameterized by the first coordinate
    prior = dirichlet_prior(alpha_rule=lambda k: np.array([2.0, 1.0]))
    ts = np.linspace(1e-9, 1 - 1e-9, 20001)
    dens = np.exp([log_prior_density(prior, np.array([t, 1 - t])) for t in ts])
    assert np.trapezoid(dens, ts) == pytest.approx(1.0, abs=1e-3)


def test_geometric_mass_ratio():
    hp = hyper_prior("geometric", 0.5, k_cap=30)
    assert hyper_log_mass(hp, 1) - hyper_log_mass(hp, 2) == pytest.approx(np.log(2.0))


def test_poisson_truncated_normalization():
    hp = hyper_prior("poisson", 1.0, k_cap=10)
    total = logsumexp([hp.log_mass(k) for k in range(1, 11)])
    assert abs(total) < 1e-12
    assert all(np.isfinite(hp.log_mass(k)) for k in range(1, 11))


def test_out_of_support_rejected():
    hp = hyper_prior("geometric", 0.5, k_cap=10)
    with pytest.raises(ValueError):
        hp.log_mass(0)
    with pytest.raises(ValueError):
        hp.log_mass(11)


def test_geometric_slope_fit_oracle():
    # fitted decay constant of the log masses equals -log(1-p)
    p = 0.3
    hp = hyper_prior("geometric", p, k_cap=40)
    ks = np.arange(1, 41, dtype=float)
    logs = np.array([hp.log_mass(int(k)) for k in ks])
    slope = np.polyfit(ks, logs, 1)[0]
    assert slope == pytest.approx(np.log(1 - p), abs=1e-10)


@pytest.mark.parametrize(
    "g",
    [
        GSpec("gaussian", 0.0, 1.0),
        GSpec("gaussian", 0.5, 2.0),
        GSpec("laplace", 0.0, 1.0),
        GSpec("laplace", -0.3, 0.7),
    ],
)
def test_tail_envelope_holds_pointwise(g):
    assert check_g_envelope(g)


def test_gaussian_envelope_q_two_laplace_q_one():
    assert GSpec("gaussian").tail_q == 2.0
    assert GSpec("laplace").tail_q == 1.0


def test_hyper_envelope_report():
    for kind, param in (("geometric", 0.5), ("poisson", 3.0)):
        report = hyper_envelope_report(hyper_prior(kind, param, k_cap=25))
        assert report["valid"]
        assert report["c1"] > 0


def test_default_k_cap():
    assert default_k_cap(2000) == 21
    assert default_k_cap(500) == 13
    assert default_k_cap(8000) == 37


def test_prior_from_config_defaults():
    sieve = prior_from_config({}, "histogram", 2000)
    assert sieve.conditional.kind == "dirichlet"
    assert sieve.hyper.kind == "geometric"
    assert sieve.hyper.k_cap == 21

    sieve = prior_from_config(
        {"hyper": {"kind": "poisson", "lambda": 2.0},
         "conditional": {"kind": "laplace", "scale": 0.5},
         "k_cap_exponent": 0.3},
        "regression",
        1000,
    )
    assert sieve.hyper.kind == "poisson"
    assert sieve.conditional.g.base == "laplace"
    assert sieve.hyper.k_cap == int(np.ceil(1000**0.3))
