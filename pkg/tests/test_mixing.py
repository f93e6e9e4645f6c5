from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from mobility_app.services import mixing, model_core
from mobility_app.services.errors import DomainError
from mobility_app.services.schemas import MixingConfig, ModelParams, StationaryDistribution


@pytest.fixture
def coeffs(set_a):
    return model_core.derive_coefficients(set_a)


def test_without_resetting_the_transient_is_gaussian():
    free = model_core.coefficients_from_log_drift(0.085, 0.02, 0.0)
    y = np.linspace(-1.0, 1.0, 41)
    t = 3.0
    gaussian = np.exp(-((y - 0.085 * t) ** 2) / (4 * 0.02 * t)) / math.sqrt(4 * math.pi * 0.02 * t)
    np.testing.assert_allclose(mixing.transient_pdf(free, y, t), gaussian, rtol=1e-12, atol=0)


def test_long_time_limit_is_stationary(coeffs):
    y = mixing.log_income_grid(coeffs)
    stationary = model_core.stationary_log_pdf(StationaryDistribution(a=coeffs.a, b=coeffs.b), y)
    np.testing.assert_allclose(mixing.transient_pdf(coeffs, y, 50.0), stationary, atol=1e-4)


def test_transient_mass_is_one(coeffs):
    y = mixing.log_income_grid(coeffs)
    assert simpson(mixing.transient_pdf(coeffs, y, 1.0), x=y) == pytest.approx(1.0, abs=1e-6)


def test_grid_places_reset_level_on_even_node(coeffs):
    config = MixingConfig()
    y = mixing.log_income_grid(coeffs, config)
    assert y.size == config.grid_points
    zero = int(np.argmin(np.abs(y)))
    assert abs(y[zero]) < 1e-12
    assert zero % 2 == 0


def test_tv_at_time_zero(coeffs):
    assert mixing.tv_distance(coeffs, 0.0) == 1.0


def test_tv_negative_time(coeffs):
    with pytest.raises(DomainError):
        mixing.tv_distance(coeffs, -1.0)


def test_tv_envelope_and_monotonicity(coeffs):
    config = MixingConfig()
    times = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 20.0]
    curve = mixing.tv_curve(coeffs, times, config)
    for t, tv in zip(times, curve):
        assert 0.0 <= tv <= math.exp(-coeffs.r * t) + config.quadrature_tolerance
    for earlier, later in zip(curve, curve[1:]):
        assert later <= earlier + 2 * config.quadrature_tolerance
    assert curve[-1] <= math.exp(-0.25 * 20) + 1e-3


def test_tv_curve_matches_single_evaluations(coeffs):
    curve = mixing.tv_curve(coeffs, [2.0, 0.5])
    assert curve[0] == pytest.approx(mixing.tv_distance(coeffs, 2.0), abs=1e-6)
    assert curve[1] == pytest.approx(mixing.tv_distance(coeffs, 0.5), abs=1e-6)


def test_mixing_time_one_over_e(set_a):
    config = mixing.config_for_preset("one-over-e")
    assert config.epsilon == pytest.approx(math.exp(-1))
    value = mixing.mixing_time(set_a, config)
    assert 0.0 < value <= 4.0 + config.bisection_tolerance


def test_mixing_time_fast_resetting():
    params = ModelParams(mu=0.105, sigma=0.2, r=10.0)
    assert mixing.mixing_time(params, MixingConfig(epsilon=0.05)) <= math.log(20) / 10 + 1e-3


def test_mixing_time_decreases_with_threshold(set_a):
    strict = mixing.mixing_time(set_a, MixingConfig(epsilon=0.05))
    loose = mixing.mixing_time(set_a, MixingConfig(epsilon=math.exp(-1)))
    assert strict >= loose


def test_unknown_preset():
    with pytest.raises(DomainError):
        mixing.config_for_preset("one-half")


def test_mixing_time_is_stable_under_grid_doubling(set_a):
    coarse = mixing.mixing_time(set_a, MixingConfig(grid_points=2001))
    fine = mixing.mixing_time(set_a, MixingConfig(grid_points=4001))
    assert fine == pytest.approx(coarse, abs=1e-3)


@pytest.mark.parametrize(
    "params",
    [ModelParams(mu=0.105, sigma=0.2, r=0.25), ModelParams(mu=0.0025, sigma=0.2, r=0.25), ModelParams(mu=0.05, sigma=0.3, r=0.5)],
)
def test_tv_vanishes_after_thirty_reset_times(params):
    coeffs = model_core.derive_coefficients(params)
    assert mixing.tv_distance(coeffs, 30.0 / params.r) < 1e-4
