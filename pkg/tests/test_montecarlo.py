from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from mobility_app.services import mixing, model_core, montecarlo
from mobility_app.services.errors import DomainError
from mobility_app.services.schemas import ModelParams, SimConfig


def test_stationary_sample_ks(set_a):
    dist = model_core.stationary_distribution(set_a)
    samples = montecarlo.sample_stationary(set_a, 100_000, burn_in=100.0, seed=1995)
    result = stats.kstest(samples, lambda x: model_core.stationary_cdf(dist, x))
    assert result.statistic < 0.01


def test_stationary_sample_is_deterministic(set_a):
    first = montecarlo.sample_stationary(set_a, 5_000, burn_in=60.0, seed=7, block_size=1_024)
    second = montecarlo.sample_stationary(set_a, 5_000, burn_in=60.0, seed=7, block_size=1_024)
    threaded = montecarlo.sample_stationary(set_a, 5_000, burn_in=60.0, seed=7, workers=4, block_size=1_024)
    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(first, threaded)


def test_burn_in_must_cover_ten_reset_intervals(set_a):
    with pytest.raises(DomainError):
        montecarlo.sample_stationary(set_a, 100, burn_in=5.0, seed=1)


def test_driftless_log_income_is_centred():
    params = ModelParams(mu=0.2**2 / 2, sigma=0.2, r=0.02)
    y = np.log(montecarlo.sample_stationary(params, 100_000, burn_in=600.0, seed=11))
    assert abs(y.mean()) < 3 * y.std(ddof=1) / math.sqrt(y.size)


def test_empirical_top_share_set_a(set_a):
    samples = montecarlo.sample_stationary(set_a, 1_000_000, burn_in=100.0, seed=1995)
    assert montecarlo.empirical_top_share(samples, 0.01) == pytest.approx(0.101, abs=0.005)


def test_empirical_top_share_edge_cases():
    assert montecarlo.empirical_top_share([3.0, 1.0, 2.0], 1.0) == pytest.approx(1.0)
    assert montecarlo.empirical_top_share(np.full(1_000, 4.2), 0.1) == pytest.approx(0.1)


def test_empirical_mean_within_three_standard_errors(light_tail):
    samples = montecarlo.sample_stationary(light_tail, 100_000, burn_in=100.0, seed=3)
    result = montecarlo.empirical_mean(samples)
    expected = model_core.mean_income(model_core.stationary_distribution(light_tail))
    assert abs(result.estimate - expected) < 3 * result.standard_error


@pytest.mark.slow
def test_empirical_mfpt_matches_closed_form(set_a):
    result = montecarlo.empirical_mfpt(set_a, 1.0, 2.0, SimConfig(n_paths=100_000, dt=1e-2))
    assert result.estimate == pytest.approx(12.0, rel=0.02)
    assert result.truncated_fraction < 1e-3


def test_empirical_mfpt_same_level(set_a):
    result = montecarlo.empirical_mfpt(set_a, 1.5, 1.5)
    assert result.estimate == 0.0
    assert result.standard_error == 0.0


@pytest.mark.slow
def test_bridge_correction_removes_missed_crossings(set_a):
    on = montecarlo.empirical_mfpt(set_a, 1.0, 2.0, SimConfig(n_paths=100_000, dt=1e-2, bridge_correction=True))
    off = montecarlo.empirical_mfpt(set_a, 1.0, 2.0, SimConfig(n_paths=100_000, dt=1e-2, bridge_correction=False))
    assert off.estimate > on.estimate


def test_empirical_mfpt_halving_dt_converges(set_a):
    coarse = montecarlo.empirical_mfpt(set_a, 1.0, 1.5, SimConfig(n_paths=20_000, dt=0.04, seed=5))
    fine = montecarlo.empirical_mfpt(set_a, 1.0, 1.5, SimConfig(n_paths=20_000, dt=0.02, seed=5))
    exact = 4.0 * (1.5**2 - 1.0)
    spread = 3 * math.hypot(coarse.standard_error, fine.standard_error)
    assert abs(fine.estimate - exact) <= abs(coarse.estimate - exact) + spread


def test_empirical_mfpt_is_deterministic(set_a):
    config = SimConfig(n_paths=4_000, dt=0.05, seed=42, block_size=1_000)
    first = montecarlo.empirical_mfpt(set_a, 1.0, 1.5, config)
    threaded = montecarlo.empirical_mfpt(set_a, 1.0, 1.5, config.model_copy(update={"workers": 3}))
    assert first == threaded


@pytest.mark.slow
def test_empirical_tv_tracks_grid_curve(set_a):
    times = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0]
    empirical = montecarlo.empirical_tv(set_a, times, SimConfig(n_paths=1_000_000, seed=1995))
    grid = mixing.tv_curve(model_core.derive_coefficients(set_a), times)
    for t, simulated, computed in zip(times, empirical.tv, grid):
        assert simulated == pytest.approx(computed, abs=0.01 + 3 * empirical.noise_floor), t
    assert empirical.tv[-1] <= math.exp(-0.25 * 20) + 3 * empirical.noise_floor + 1e-3
    assert empirical.bin_count > 10


def test_empirical_tv_is_deterministic(set_a):
    config = SimConfig(n_paths=20_000, seed=9, block_size=4_096)
    first = montecarlo.empirical_tv(set_a, [1.0, 3.0], config)
    second = montecarlo.empirical_tv(set_a, [1.0, 3.0], config.model_copy(update={"workers": 2}))
    assert first == second
