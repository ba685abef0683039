import numpy as np
import pytest

from sievecred import (
    build_ball,
    covers,
    credible_radius,
    diameter_proxy,
    gaussian_prior,
    generate_truth,
    make_family,
    posterior_center,
    sample_given_k,
    wilson_interval,
)
from sievecred.credible import inflated_diameter
from sievecred.families import CenterPoint
from sievecred.inference import PosteriorDraws


def _coef_draws(values):
    values = np.asarray(values, dtype=float).reshape(-1, 1)
    return PosteriorDraws("regression", np.ones(values.shape[0], dtype=int), {1: values})


@pytest.fixture(scope="module")
def reg16():
    return make_family("regression", n=16)


def test_radius_zero_for_degenerate_posterior(reg16):
    draws = _coef_draws(np.full(50, 0.7))
    center = CenterPoint("regression", "coefficients", np.array([0.7]))
    assert credible_radius(draws, center, reg16, 0.05) == 0.0


def test_radius_order_statistic_convention(reg16):
    # distances 0.01..1.00, alpha=0.05: rank ceil(0.95*100) = 95 -> 0.95
    draws = _coef_draws(0.01 * np.arange(1, 101))
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    assert credible_radius(draws, center, reg16, 0.05) == pytest.approx(0.95, abs=1e-12)
    assert credible_radius(draws, center, reg16, 0.5) == pytest.approx(0.50, abs=1e-12)


def test_radius_non_increasing_in_alpha(reg16, rng):
    draws = _coef_draws(rng.standard_normal(400))
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    alphas = [0.01, 0.05, 0.1, 0.25, 0.5, 0.9]
    radii = [credible_radius(draws, center, reg16, a) for a in alphas]
    assert all(r1 >= r2 for r1, r2 in zip(radii, radii[1:]))


def test_radius_converges_to_true_quantile(reg16, rng):
    draws = _coef_draws(rng.random(200_000))
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    assert credible_radius(draws, center, reg16, 0.05) == pytest.approx(0.95, abs=0.01)


def test_radius_against_exact_gaussian_posterior_oracle():
    fam = make_family("regression", n=300)
    truth = generate_truth("self_similar", beta=1.0, seed=41)
    data = fam.simulate(truth, 300, seed=42)
    k = 3
    draws = sample_given_k(fam, gaussian_prior(), data, k, 4000, seed=43)
    center = posterior_center(draws, fam)
    r = credible_radius(draws, center, fam, 0.05)

    # oracle: 10^6 draws from the closed-form posterior, distances to the same center
    phi = fam.design.phi(k)
    prec = phi.T @ phi + np.eye(k)
    mean = np.linalg.solve(prec, phi.T @ data.y)
    chol_cov = np.linalg.cholesky(np.linalg.inv(prec))
    rng = np.random.default_rng(44)
    big = mean + rng.standard_normal((1_000_000, k)) @ chol_cov.T
    gram = fam.design.gram(k)
    diff = big - center.values[:k]
    dist = np.sqrt(np.einsum("si,ij,sj->s", diff, gram, diff))
    oracle = np.quantile(dist, 0.95)

    boot_rng = np.random.default_rng(45)
    module_dist = fam.draw_distances(draws, center)
    reps = [
        np.quantile(boot_rng.choice(module_dist, module_dist.size, replace=True), 0.95)
        for _ in range(300)
    ]
    assert abs(r - oracle) < 3 * np.std(reps, ddof=1)


def test_radius_stable_under_doubling(reg16):
    fam = make_family("regression", n=300)
    truth = generate_truth("self_similar", beta=1.0, seed=46)
    data = fam.simulate(truth, 300, seed=47)
    draws_s = sample_given_k(fam, gaussian_prior(), data, 3, 2000, seed=48)
    draws_d = sample_given_k(fam, gaussian_prior(), data, 3, 4000, seed=49)
    center = posterior_center(draws_d, fam)
    r_s = credible_radius(draws_s, center, fam, 0.05)
    r_d = credible_radius(draws_d, center, fam, 0.05)
    dist = fam.draw_distances(draws_s, center)
    rng = np.random.default_rng(50)
    reps = [np.quantile(rng.choice(dist, dist.size, replace=True), 0.95) for _ in range(300)]
    assert abs(r_s - r_d) < 3 * np.std(reps, ddof=1)


def test_build_ball_inflation_arithmetic(reg16):
    draws = _coef_draws([0.1, 0.2, 0.3])
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    ball = build_ball("hierarchical", draws, center, reg16, 0.5, 1.0, np.e)
    assert ball.inflation == pytest.approx(1.0, abs=1e-15)
    ball = build_ball("hierarchical", draws, center, reg16, 0.5, 2.0, 1000)
    assert ball.inflation == pytest.approx(2.0 * np.sqrt(np.log(1000.0)), abs=1e-12)
    assert ball.inflation == pytest.approx(5.2565, abs=1e-3)


def test_build_ball_empirical_k_consistency(reg16):
    draws = _coef_draws([0.1, 0.2])
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    ball = build_ball("empirical", draws, center, reg16, 0.5, 1.0, 100, k_hat=1)
    assert ball.k_hat == 1
    with pytest.raises(ValueError):
        build_ball("empirical", draws, center, reg16, 0.5, 1.0, 100, k_hat=3)
    with pytest.raises(ValueError):
        build_ball("frequentist", draws, center, reg16, 0.5, 1.0, 100)


def test_covers_center_equals_truth(reg16):
    truth = generate_truth("explicit", beta=1.0, coefficients=[0.5])
    draws = _coef_draws(np.full(20, 0.5))
    center = posterior_center(draws, reg16)
    ball = build_ball("hierarchical", draws, center, reg16, 0.05, 2.0, 16)
    assert ball.r_alpha == 0.0
    covered, d = covers(ball, truth, reg16)
    assert covered and d == 0.0


def test_covers_zero_radius_off_center(reg16):
    truth = generate_truth("explicit", beta=1.0, coefficients=[0.4])
    draws = _coef_draws(np.full(20, 0.1))
    center = posterior_center(draws, reg16)
    ball = build_ball("hierarchical", draws, center, reg16, 0.05, 2.0, 16)
    covered, d = covers(ball, truth, reg16)
    assert not covered and d > 0.0


def test_covered_at_larger_inflation(reg16, rng):
    truth = generate_truth("explicit", beta=1.0, coefficients=[0.4])
    draws = _coef_draws(0.4 + 0.1 * rng.standard_normal(200))
    center = posterior_center(draws, reg16)
    for L, L_bigger in ((0.5, 1.0), (1.0, 4.0)):
        small = build_ball("hierarchical", draws, center, reg16, 0.05, L, 100)
        big = build_ball("hierarchical", draws, center, reg16, 0.05, L_bigger, 100)
        if covers(small, truth, reg16)[0]:
            assert covers(big, truth, reg16)[0]


def test_diameter_proxy_values(reg16):
    draws = _coef_draws([0.0, 0.3])
    center = CenterPoint("regression", "coefficients", np.array([0.0]))
    ball = build_ball("hierarchical", draws, center, reg16, 0.4, 2.0, 100)
    assert diameter_proxy(ball) == pytest.approx(2 * ball.r_alpha)
    assert inflated_diameter(ball) == pytest.approx(2 * ball.inflation * ball.r_alpha)
    zero = build_ball("hierarchical", _coef_draws([0.0]), center, reg16, 0.4, 2.0, 100)
    assert diameter_proxy(zero) == 0.0


def test_well_specified_conjugate_coverage_near_nominal():
    # truth inside Theta(3), model k=5: the uninflated 95% ball should cover
    # the truth close to nominally (within +/- 0.06 over 500 replicates)
    n, k, reps = 200, 5, 500
    fam = make_family("regression", n=n)
    truth = generate_truth("explicit", beta=1.0, coefficients=[0.8, -0.5, 0.3])
    t_emb = fam.truth_embedding(truth)
    metric = fam.metric()
    hits = 0
    for r_id in range(reps):
        data = fam.simulate(truth, n, seed=1000 + r_id)
        draws = sample_given_k(fam, gaussian_prior(), data, k, 800, seed=2000 + r_id)
        center = posterior_center(draws, fam)
        r = credible_radius(draws, center, fam, 0.05)
        d = metric.distance(t_emb, fam.center_embedding(center))
        hits += d <= r
    assert abs(hits / reps - 0.95) < 0.06


def test_wilson_interval_basic():
    lo, hi = wilson_interval(95, 100)
    assert 0.87 < lo < 0.95 < hi < 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and hi > 0.0
