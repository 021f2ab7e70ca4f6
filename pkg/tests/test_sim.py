import itertools
import math

import numpy as np
import pytest
from scipy import stats

from mtfcost import quad
from mtfcost.sim import (
    MoveToFrontList,
    SamplingError,
    SimConfig,
    WeightVector,
    _log_increments,
    default_burn_in,
    empirical_laplace,
    estimate_moments,
    limit_mixture_draws,
    log_tempered_stable,
    make_rng,
    sample_log_weight_rows,
    sample_search_cost_chain,
    sample_search_cost_exact,
    simulate_finite_n,
    simulate_limit,
)
from mtfcost.subordinator import GammaExponent, GenGammaExponent, PitmanYorMixture, StableExponent


def enumerate_cost_moments(weights):
    """First two moments of the stationary search cost by summing over all orders.

    The stationary law of the list is sampling without replacement in
    proportion to the weights.
    """
    p = np.asarray(weights, dtype=float)
    p = p / p.sum()
    m1 = m2 = 0.0
    for order in itertools.permutations(range(p.size)):
        prob, left = 1.0, 1.0
        for item in order:
            prob *= p[item] / left
            left -= p[item]
        for depth, item in enumerate(order):
            m1 += prob * p[item] * depth
            m2 += prob * p[item] * depth**2
    return m1, m2


def pooled_z(a, b):
    ea, eb = estimate_moments(a, 2), estimate_moments(b, 2)
    return [abs(x - y) / math.hypot(sx, sy)
            for x, y, sx, sy in zip(ea.moments, eb.moments, ea.std_errors, eb.std_errors)]


# --- increments -----------------------------------------------------------------


@pytest.mark.parametrize("exponent", [
    StableExponent(0.2),
    StableExponent(0.7, mass=3.0),
    GammaExponent(2.0),
    GenGammaExponent(0.3, u=4.0, mass=2.0),
    GenGammaExponent(0.25, u=1.0, mass=0.25 * 3.0),  # a Pitman-Yor conditional
], ids=["stable0.2", "stable0.7", "gamma", "tempered", "py-conditional"])
def test_increment_transform(exponent):
    n, size = 10, 100_000
    w = np.exp(_log_increments(exponent, n, size, make_rng(11)))
    for s in (0.1, 0.5, 1.0, 3.0, 10.0):
        mean, se = empirical_laplace(w, s)
        assert abs(mean - math.exp(-exponent.psi(s) / n)) < 4 * se + 1e-12


def test_pitman_yor_weight_rows_transform():
    # given Z the row total has exponent gamma Z ((1+s)^gamma - 1)/gamma; mixing over
    # Z ~ Gamma(theta/gamma) leaves (1+s)^(-theta)
    model = PitmanYorMixture(0.25, 2.0)
    w = np.exp(sample_log_weight_rows(model, 5, 40_000, make_rng(3)))
    for s in (0.3, 1.0, 4.0):
        mean, se = empirical_laplace(w.sum(axis=1), s)
        assert abs(mean - (1 + s) ** -model.theta) < 4 * se


def test_tiny_gamma_shapes_do_not_underflow():
    lw = _log_increments(GammaExponent(1.0), 5000, 10_000, make_rng(0))
    assert np.all(np.isfinite(lw))
    assert np.mean(lw < math.log(1e-308)) > 0.5


def test_tempered_rejection_cap():
    with pytest.raises(SamplingError):
        log_tempered_stable(0.5, 1.0, 1e12, 3, make_rng(0))


# --- finite-n engines -------------------------------------------------------------


def test_two_item_exact_probability():
    draws = sample_search_cost_exact(WeightVector.from_weights([2.0, 1.0]), make_rng(1), 200_000)
    p = draws.mean()
    assert abs(p - 4 / 9) < 4 * math.sqrt(p * (1 - p) / draws.size)


WEIGHT_SETS = {
    2: [[1, 1], [3, 1], [10, 1]],
    3: [[1, 1, 1], [5, 2, 1], [0.2, 1, 7]],
    5: [[1, 1, 1, 1, 1], [5, 4, 3, 2, 1], [16, 8, 4, 2, 1]],
    10: [np.ones(10), np.arange(1, 11), 1.5 ** np.arange(10)],
}


@pytest.mark.parametrize("n", sorted(WEIGHT_SETS))
@pytest.mark.parametrize("which", range(3))
def test_exact_and_chain_agree(n, which):
    weights = WeightVector.from_weights(WEIGHT_SETS[n][which])
    size = 100_000
    exact = sample_search_cost_exact(weights, make_rng(100 + n), size)
    chain = sample_search_cost_chain(weights, SimConfig(size, 0), make_rng(200 + n), size)
    assert max(pooled_z(exact, chain)) < 3
    if n <= 3:
        m1, m2 = enumerate_cost_moments(weights.weights)
        for draws in (exact, chain):
            est = estimate_moments(draws, 2)
            assert abs(est.moments[0] - m1) < 3 * est.std_errors[0]
            assert abs(est.moments[1] - m2) < 3 * est.std_errors[1]


def test_chain_state_matches_literal_list():
    weights = WeightVector.from_weights([0.5, 3.0, 1.0, 2.0, 0.1, 1.2])
    cum = np.cumsum(weights.scaled())
    for seed in range(40):
        burn = 1 + seed % 9
        cost = sample_search_cost_chain(weights, SimConfig(1, 0, burn_in=burn), make_rng(seed))
        rng = make_rng(seed)
        mtf = MoveToFrontList(weights.n)
        for _ in range(burn):
            mtf.request(min(int(np.searchsorted(cum, (1.0 - rng.random(1)) * cum[-1])[0]), weights.n - 1))
        final = min(int(np.searchsorted(cum, (1.0 - rng.random(1)) * cum[-1])[0]), weights.n - 1)
        assert cost == mtf.request(final)


def test_literal_list_moves_to_front():
    mtf = MoveToFrontList(4)
    assert mtf.request(2) == 2
    assert mtf.items == [2, 0, 1, 3]
    assert mtf.request(2) == 0
    assert mtf.request(3) == 3


@pytest.mark.parametrize("n", [5, 20])
def test_exact_sampler_matches_finite_n_transform(n):
    model = StableExponent(0.2)
    rng = make_rng(n)
    per_weight = {0.5: [], 1.0: []}
    for _ in range(200):
        w = WeightVector(sample_log_weight_rows(model, n, 1, rng)[0])
        draws = sample_search_cost_exact(w, rng, 5000)
        for s in per_weight:
            per_weight[s].append(empirical_laplace(draws, s)[0])
    for s, values in per_weight.items():
        values = np.asarray(values)
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - quad.laplace_finite_n(model, n, s)) < 4 * se


def test_default_burn_in():
    assert default_burn_in(10) == math.ceil(500 * math.log(10))
    assert SimConfig(10, 0).burn_in_for(10) == default_burn_in(10)
    assert SimConfig(10, 0, burn_in=7).burn_in_for(10) == 7


# --- limiting law -------------------------------------------------------------------


@pytest.mark.parametrize("model", [StableExponent(0.2), GenGammaExponent(0.3, u=2.0), GammaExponent(1.5)],
                         ids=["stable", "gg", "gamma"])
def test_limit_first_stage_marginal(model):
    x, y, lam = limit_mixture_draws(model, 20_000, make_rng(5))
    result = stats.kstest(x, lambda t: -np.expm1(-model.psi(np.asarray(t))))
    assert result.pvalue > 0.01
    assert np.all(y >= 0) and np.all(lam >= 0)


@pytest.mark.parametrize("model", [StableExponent(0.2), GenGammaExponent(0.2, u=1.0), GammaExponent(2.0)],
                         ids=["stable", "gg", "gamma"])
def test_limit_sampler_transform(model):
    draws = simulate_limit(model, SimConfig(200_000, 9, workers=2)).draws
    for s in (0.3, 1.0, 4.0):
        mean, se = empirical_laplace(draws, s)
        assert abs(mean - quad.laplace_limit(model, s)) < 4 * se


# --- drivers and estimators ------------------------------------------------------------


def test_determinism_and_worker_split():
    model = PitmanYorMixture(0.25, 1.0)
    a = simulate_finite_n(model, 50, SimConfig(3000, 42, workers=3)).draws
    b = simulate_finite_n(model, 50, SimConfig(3000, 42, workers=3)).draws
    c = simulate_finite_n(model, 50, SimConfig(3000, 43, workers=3)).draws
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.size == 3000
    la = simulate_limit(model, SimConfig(1000, 1, workers=4)).draws
    lb = simulate_limit(model, SimConfig(1000, 1, workers=4)).draws
    np.testing.assert_array_equal(la, lb)


def test_chain_engine_runs_through_driver():
    sample = simulate_finite_n(GammaExponent(1.0), 8, SimConfig(2000, 3, burn_in=200), engine="chain")
    assert sample.draws.min() >= 0 and sample.draws.max() <= 7
    assert sample.summary(1)["n"] == 8
    with pytest.raises(ValueError):
        simulate_finite_n(GammaExponent(1.0), 8, SimConfig(10, 3), engine="bogus")


def test_estimate_moments():
    est = estimate_moments(np.array([0, 1, 2, 3]), 2)
    assert est.moments == [1.5, 3.5]
    assert est.std_errors[0] == pytest.approx(np.std([0, 1, 2, 3], ddof=1) / 2)
    with pytest.raises(SamplingError):
        estimate_moments(np.array([1e300]), 2)
    with pytest.raises(ValueError):
        estimate_moments(np.array([]), 1)


@pytest.mark.parametrize("bad", [
    lambda: SimConfig(0, 1),
    lambda: SimConfig(10, -1),
    lambda: SimConfig(10, 1, workers=0),
    lambda: WeightVector.from_weights([1.0, 0.0]),
    lambda: WeightVector(np.array([])),
])
def test_validation(bad):
    with pytest.raises(ValueError):
        bad()


def test_weight_vector_is_scale_free():
    w = WeightVector(np.array([-800.0, -801.0, -805.0]))
    assert w.probabilities.sum() == pytest.approx(1.0)
    assert w.scaled().max() == 1.0
