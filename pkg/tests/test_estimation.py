import math

import numpy as np
import pytest
from scipy import optimize

from mallows.estimation import (
    THETA_MAX,
    THETA_MIN,
    FittedModel,
    expected_inversions,
    fit_gm_known_center,
    fit_igm,
    fit_igm_thetas,
    fit_phi,
    fit_theta_known_center,
    igm_theta,
    log_likelihood,
    log_normalizer_phi,
    mean_inversions_g,
    phi_log_density,
    q_factorial,
    solve_theta_phi,
    solve_theta_stage,
    sufficient_stats,
    truncgeo_mean,
    truncgeo_var,
)
from mallows.permutation import Permutation, all_permutations, inversions
from mallows.ranking import RankingDataset
from mallows.sampling import sample_gm, sample_igm_top_t, sample_mallows_phi, truncated_geometric_pmf


def brute_f(q, n):
    return math.fsum(q ** inversions(w) for w in all_permutations(n))


def brute_g(q, n):
    return math.fsum(inversions(w) * q ** inversions(w) for w in all_permutations(n)) / brute_f(q, n)


def test_q_factorial_examples():
    assert q_factorial(0.3, 2) == pytest.approx(1.3, rel=1e-14)
    assert q_factorial(0.5, 4) == pytest.approx(brute_f(0.5, 4), rel=1e-13)
    assert q_factorial(0.0, 6) == 1.0
    assert math.exp(log_normalizer_phi(1.0, 5)) == pytest.approx(brute_f(math.exp(-1), 5), rel=1e-13)


def test_g_examples():
    q = math.exp(-1)
    assert mean_inversions_g(q, 2) == pytest.approx(q / (1 + q), rel=1e-14)
    assert mean_inversions_g(q, 2) == pytest.approx(0.268941421, rel=1e-8)
    assert mean_inversions_g(0.0, 5) == 0.0
    assert mean_inversions_g(q, 5) == pytest.approx(brute_g(q, 5), rel=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("q", [0.1, 0.5, 0.9, 0.999])
def test_g_matches_brute_force(q, n):
    assert mean_inversions_g(q, n) == pytest.approx(brute_g(q, n), rel=1e-10)
    assert expected_inversions(-math.log(q), n) == pytest.approx(brute_g(q, n), rel=1e-10)


def test_g_limit_near_one():
    n = 6
    assert mean_inversions_g(1 - 1e-12, n) == pytest.approx(n * (n - 1) / 4, rel=1e-8)


def test_truncgeo_moments_match_pmf():
    for theta in (1e-4, 0.01, 0.3, 1.0, 4.0):
        for k in (1, 2, 3, 7, 20):
            p = truncated_geometric_pmf(theta, k)
            x = np.arange(k)
            mean = float(p @ x)
            var = float(p @ (x - mean) ** 2)
            assert truncgeo_mean(theta, k) == pytest.approx(mean, rel=1e-9, abs=1e-13)
            assert truncgeo_var(theta, k) == pytest.approx(var, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("theta", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("n", [3, 5, 10])
def test_mle_inverse_identity(theta, n):
    est, diag = solve_theta_phi(expected_inversions(theta, n), n)
    assert abs(est - theta) < 1e-8
    assert diag["clamped"] is None


def test_clamping_policy():
    assert solve_theta_phi(0.0, 5) == (THETA_MAX, solve_theta_phi(0.0, 5)[1])
    assert solve_theta_phi(0.0, 5)[1]["clamped"] == "theta_max"
    assert solve_theta_phi(5.0, 5)[1]["clamped"] == "theta_min"
    assert solve_theta_stage(0.0, 4)[1]["clamped"] == "theta_max"
    assert igm_theta(0.0) == (THETA_MAX, "theta_max")
    assert igm_theta(1e12)[1] is None or igm_theta(1e12)[0] >= THETA_MIN


def test_stage_solver_inverse():
    for k in (2, 3, 8):
        for theta in (0.2, 1.0, 3.0):
            est, _ = solve_theta_stage(truncgeo_mean(theta, k), k)
            assert est == pytest.approx(theta, abs=1e-8)


def test_igm_theta_closed_form_vs_numeric():
    assert igm_theta(1.0)[0] == pytest.approx(math.log(2), rel=1e-15)
    mean = 0.73

    def negll(th):
        return -(-th * mean + math.log1p(-math.exp(-th)))

    res = optimize.minimize_scalar(negll, bounds=(1e-6, 20), method="bounded", options={"xatol": 1e-10})
    assert igm_theta(mean)[0] == pytest.approx(res.x, abs=1e-6)
    assert igm_theta(1e6)[0] < 1e-5


def test_phi_fit_recovers_theta():
    rng = np.random.default_rng(4)
    words = sample_mallows_phi(5, 1.0, rng, size=100_000)
    data = RankingDataset.from_words(words)
    model = fit_theta_known_center(data, (1, 2, 3, 4, 5))
    assert 0.97 <= model.theta <= 1.03
    joint = fit_phi(data)
    assert joint.center == (1, 2, 3, 4, 5)
    assert joint.theta == pytest.approx(model.theta, rel=1e-12)


def test_all_copies_of_center_clamps():
    data = RankingDataset([(2, 3, 1)], [10], universe=3)
    model = fit_theta_known_center(data, (2, 3, 1))
    assert model.theta == THETA_MAX
    assert model.diagnostics["clamped"] == "theta_max"
    assert fit_phi(data).center == (2, 3, 1)


def test_log_likelihood_normalises():
    theta = 0.7
    center = (2, 4, 1, 3)
    model = FittedModel("phi", (theta,), center, n=4)
    total = 0.0
    for w in all_permutations(4):
        obs = Permutation(w).ranked
        total += math.exp(log_likelihood(RankingDataset([obs], universe=4), model))
        assert log_likelihood(RankingDataset([obs], universe=4), model) == pytest.approx(phi_log_density(w, theta, center), abs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-12)
    single = RankingDataset([center], universe=4)
    assert log_likelihood(single, model) == pytest.approx(-log_normalizer_phi(theta, 4), abs=1e-12)


def test_gm_log_likelihood_normalises():
    thetas = (0.3, 1.1, 2.0)
    model = FittedModel("gm", thetas, (1, 2, 3, 4), n=4)
    total = math.fsum(
        math.exp(log_likelihood(RankingDataset([Permutation(w).ranked], universe=4), model)) for w in all_permutations(4)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_igm_density_example():
    model = FittedModel("igm", (1.0, 1.0), (1, 2, 3), diagnostics={"t": 2})
    data = RankingDataset([(1, 2)])
    assert math.exp(log_likelihood(data, model)) == pytest.approx((1 - math.exp(-1)) ** 2, rel=1e-14)


def test_gm_fit_equal_thetas():
    rng = np.random.default_rng(9)
    words = sample_gm(6, (1.0,) * 5, rng, size=100_000)
    model = fit_gm_known_center(RankingDataset.from_words(words), (1, 2, 3, 4, 5, 6))
    assert len(model.thetas) == 5
    # stage-wise Monte Carlo error grows with the stage index
    assert np.allclose(model.thetas, 1.0, atol=0.06)


def test_gm_stage_means_match_sampler():
    rng = np.random.default_rng(10)
    thetas = (0.5, 1.5, 0.8)
    words = sample_gm(4, thetas, rng, size=50_000)
    data = RankingDataset.from_words(words)
    stats = sufficient_stats(data, (1, 2, 3, 4))
    for j, (th, m) in enumerate(zip(thetas, stats.stage_means)):
        k = 4 - j
        se = math.sqrt(truncgeo_var(th, k) / 50_000)
        assert abs(m - truncgeo_mean(th, k)) < 4 * se


def test_igm_fit_synthetic():
    rng = np.random.default_rng(2)
    thetas = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5)
    sample = sample_igm_top_t(thetas, rng, size=5000)
    data = RankingDataset.from_rankings(map(tuple, sample))
    model = fit_igm(data, 3)
    assert model.center[:6] == (1, 2, 3, 4, 5, 6)
    assert np.allclose(model.thetas, thetas[:3], atol=0.06)
    single = fit_igm_thetas(data, model.center, 2, single=True)
    assert len(single.thetas) == 1
    assert 0.85 < single.theta < 1.05


def test_fit_requires_complete_data():
    data = RankingDataset([(1, 2)], universe=3)
    with pytest.raises(ValueError):
        fit_theta_known_center(data, (1, 2, 3))
