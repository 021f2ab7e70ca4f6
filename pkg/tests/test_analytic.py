import math

import numpy as np
import pytest

from mtfcost.analytic import (
    MomentRequest,
    finiteness_threshold,
    limit_moment,
    moment_dirichlet,
    psi_l_closed,
    psi_l_gamma,
    psi_l_gengamma,
    psi_l_pitman_yor,
    psi_l_stable,
)
from mtfcost.special_fn import pochhammer
from mtfcost.subordinator import GammaExponent, GenGammaExponent, PitmanYorMixture, StableExponent


def moment(model, k):
    return limit_moment(MomentRequest(model, k))


@pytest.mark.parametrize("model, k, expected", [
    (StableExponent(0.2), 2, 1.0),
    (StableExponent(0.25), 1, 0.5),
    (GenGammaExponent(0.2, u=1.0), 2, 14.333333333333334),
    (PitmanYorMixture(0.25, 1.0), 1, 2.5),
    (GammaExponent(2.0), 1, 2.0),
])
def test_reference_moments(model, k, expected):
    value = moment(model, k)
    assert value.finite
    assert value.value == pytest.approx(expected, rel=1e-12)


def test_reference_psi_terms():
    assert psi_l_stable(0.2, 1) == pytest.approx(1 / 3)
    assert psi_l_stable(0.2, 2) == pytest.approx(2 / 3)
    assert psi_l_gengamma(0.2, 1.0, 2) == pytest.approx(4 / 6 * (1 + 5 + 12.5))
    assert psi_l_pitman_yor(0.3, 2.0, 2) == pytest.approx(2 * (2 / 0.3 + 1) * (2 / 0.3 + 2) / pochhammer(1 / 0.3 - 3, 2))
    assert psi_l_gamma(2.0, 3) == 48.0


def test_stable_first_moment_formula():
    for g in np.linspace(0.01, 0.49, 25):
        assert psi_l_stable(g, 1) == pytest.approx(g / (1 - 2 * g), rel=1e-12)


@pytest.mark.parametrize("k", range(1, 7))
def test_gengamma_without_tempering_is_stable(k):
    for g in np.linspace(0.02, finiteness_threshold(k) - 1e-3, 7):
        for l in range(1, k + 1):
            direct = math.factorial(l) ** 2 / pochhammer(1 / g - l - 1, l)
            assert psi_l_gengamma(g, 0.0, l, k) == direct


def test_monotone_in_u():
    for k in (1, 2, 3):
        values = [moment(GenGammaExponent(0.2, u=u), k).value for u in np.linspace(0, 5, 11)]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_monotone_in_theta():
    thetas = np.linspace(0.1, 10, 15)
    for k in (1, 2):
        py = [moment(PitmanYorMixture(0.2, t), k).value for t in thetas]
        dp = [moment_dirichlet(t, k) for t in thetas]
        assert all(b > a for a, b in zip(py, py[1:]))
        assert all(b > a for a, b in zip(dp, dp[1:]))


@pytest.mark.parametrize("k", range(1, 6))
def test_finiteness_boundary(k):
    edge = finiteness_threshold(k)
    for model in (StableExponent, lambda g: GenGammaExponent(g, u=2.0), lambda g: PitmanYorMixture(g, 1.5)):
        inside = moment(model(edge - 1e-3), k)
        assert inside.finite and math.isfinite(inside.value)
        outside = moment(model(edge), k)
        assert not outside.finite and outside.value is None


def test_divergence_is_a_value_not_an_exception():
    v = moment(StableExponent(0.4), 2)
    assert v.to_dict() == {"finite": False, "value": None, "psi_terms": [None, None]}
    assert v.threshold == pytest.approx(1 / 3)


def test_k_threshold_governs_lower_order_terms():
    # Psi(1) alone is finite at gamma = 0.4, but not as part of the second moment
    assert math.isfinite(psi_l_stable(0.4, 1))
    assert psi_l_stable(0.4, 1, k=2) == math.inf


@pytest.mark.parametrize("theta", [0.5, 1.0, 5.0])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_pitman_yor_approaches_dirichlet(theta, k):
    assert moment(PitmanYorMixture(1e-4, theta), k).value == pytest.approx(moment_dirichlet(theta, k), rel=1e-2)


def test_dirichlet_moments_match_gamma_family():
    for theta in (0.5, 2.0, 7.0):
        for k in (1, 2, 3, 4):
            assert moment(GammaExponent(theta), k).value == pytest.approx(moment_dirichlet(theta, k))
    assert moment_dirichlet(2.0, 1) == 2.0
    # a_1 * 2 + a_2 * 2! * 2^2
    assert moment_dirichlet(2.0, 2) == 10.0


def test_pitman_yor_log_space_branch_is_continuous():
    # theta/gamma crosses the log-space switch between these two points
    a = psi_l_pitman_yor(0.01, 9.99, 2)
    b = psi_l_pitman_yor(0.01, 10.01, 2)
    assert b > a
    assert b / a == pytest.approx((10.01 / 9.99) ** 2, rel=1e-2)
    huge = psi_l_pitman_yor(1e-4, 1e6, 3)
    assert math.isfinite(huge) and huge == pytest.approx(6 * 1e18, rel=1e-3)


def test_mass_scales_tempering_only():
    # psi scaled by mass: Psi depends on mass only through beta = mass u^gamma / gamma
    a = psi_l_closed(GenGammaExponent(0.2, u=1.0, mass=2.0), 2)
    b = psi_l_closed(GenGammaExponent(0.2, u=2 ** (1 / 0.2), mass=1.0), 2)
    assert a == pytest.approx(b, rel=1e-12)


def test_bad_requests():
    with pytest.raises(ValueError):
        MomentRequest(StableExponent(0.2), 0)
    with pytest.raises(ValueError):
        psi_l_stable(0.2, 2, k=1)
    with pytest.raises(TypeError):
        psi_l_closed(object(), 1)
