from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from mobility_app.services import mfpt, model_core
from mobility_app.services.errors import DomainError
from mobility_app.services.schemas import ModelParams, PassageQuery


def test_kernel_values(set_a):
    coeffs = model_core.derive_coefficients(set_a)
    assert mfpt.fpt_laplace_kernel(coeffs, 0.0, 3.0) == 1.0
    assert mfpt.fpt_laplace_kernel(coeffs, 0.25, math.log(2.0)) == pytest.approx(0.25, rel=1e-12)
    assert mfpt.fpt_laplace_kernel(coeffs, 1.7, 0.0) == 1.0


def test_kappa_at_reset_rate_is_upper_exponent(set_a):
    coeffs = model_core.derive_coefficients(set_a)
    assert mfpt.kappa(coeffs, coeffs.r) == pytest.approx(coeffs.a, rel=1e-12)


@pytest.mark.parametrize("s", [0.01, 0.25, 0.3, 1.0])
def test_kappa_derivative_matches_finite_difference(set_a, s):
    coeffs = model_core.derive_coefficients(set_a)
    h = 1e-6
    numeric = (mfpt.kappa(coeffs, s + h) - mfpt.kappa(coeffs, s - h)) / (2 * h)
    assert mfpt.kappa_derivative(coeffs, s) == pytest.approx(numeric, rel=1e-6)


def test_kernel_rejects_negative_arguments(set_a):
    coeffs = model_core.derive_coefficients(set_a)
    with pytest.raises(DomainError):
        mfpt.fpt_laplace_kernel(coeffs, -0.1, 1.0)
    with pytest.raises(DomainError):
        mfpt.fpt_laplace_kernel(coeffs, 0.1, -1.0)


def test_mfpt_levels_set_a(set_a):
    assert mfpt.mfpt_levels(set_a, 1.0, 2.0) == pytest.approx(12.0, rel=1e-12)
    assert mfpt.mfpt_levels(set_a, 0.5, 2.0) == pytest.approx(15.0, rel=1e-12)
    assert mfpt.mfpt_levels(set_a, 1.3, 1.3) == 0.0


def test_mfpt_levels_matches_renewal_identity(set_a):
    coeffs = model_core.derive_coefficients(set_a)
    for x_start, x_target in [(1.0, 2.0), (0.5, 2.0), (1.2, 5.0)]:
        renewal = mfpt.renewal_mfpt(coeffs, math.log(x_start), math.log(x_target))
        assert renewal == pytest.approx(mfpt.mfpt_levels(set_a, x_start, x_target), rel=1e-10)


@pytest.mark.parametrize("x_start, x_mid, x_target", [(1.0, 1.5, 3.0), (0.4, 1.0, 2.0), (1.1, 1.1, 4.0)])
def test_mfpt_is_additive(set_a, x_start, x_mid, x_target):
    total = mfpt.mfpt_levels(set_a, x_start, x_target)
    split = mfpt.mfpt_levels(set_a, x_start, x_mid) + mfpt.mfpt_levels(set_a, x_mid, x_target)
    assert total == pytest.approx(split, rel=1e-12)


def test_mfpt_levels_domain(set_a):
    with pytest.raises(DomainError):
        mfpt.mfpt_levels(set_a, 2.0, 1.5)
    with pytest.raises(DomainError):
        mfpt.mfpt_levels(set_a, 0.3, 0.8)


def test_mfpt_percentiles_set_a(set_a):
    assert mfpt.mfpt_percentiles(set_a, 0.50, 0.75) == pytest.approx(6.060606, abs=1e-6)
    assert mfpt.mfpt_percentiles(set_a, 0.50, 0.90) == pytest.approx(24.242424, abs=1e-6)


def test_mfpt_percentiles_requires_strict_order(set_a):
    with pytest.raises(DomainError):
        mfpt.mfpt_percentiles(set_a, 0.5, 0.5)


def test_mfpt_percentiles_below_reset_level():
    # a = 4, b = 3.125 puts the median below x0
    params = ModelParams(mu=0.0025, sigma=0.2, r=0.25)
    with pytest.raises(DomainError):
        mfpt.mfpt_percentiles(params, 0.5, 0.9)


def test_mfpt_dispatch(set_a):
    assert mfpt.mfpt(set_a, PassageQuery(start=1.0, target=2.0)) == pytest.approx(12.0)
    query = PassageQuery(start=0.5, target=0.9, mode="percentiles")
    assert mfpt.mfpt(set_a, query) == pytest.approx(24.242424, abs=1e-6)


def test_passage_query_rejects_downward():
    with pytest.raises(ValidationError):
        PassageQuery(start=2.0, target=1.0)


def test_mfpt_is_additive_over_random_draws():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        params = ModelParams(
            mu=float(rng.uniform(-0.05, 0.2)),
            sigma=float(rng.uniform(0.1, 0.4)),
            r=float(rng.uniform(0.05, 0.5)),
        )
        for _ in range(100):
            x_start = float(rng.uniform(0.3, 3.0))
            x_mid = max(x_start, 1.0) * float(rng.uniform(1.0, 1.5))
            x_target = x_mid * float(rng.uniform(1.05, 2.0))
            total = mfpt.mfpt_levels(params, x_start, x_target)
            split = mfpt.mfpt_levels(params, x_start, x_mid) + mfpt.mfpt_levels(params, x_mid, x_target)
            assert total == pytest.approx(split, rel=1e-10)


def test_mfpt_grows_with_upper_exponent():
    # mu décroissant a sigma et r fixés : a croissant
    mus = [0.3, 0.2, 0.105, 0.05, 0.0, -0.05, -0.2]
    exponents, times = [], []
    for mu in mus:
        params = ModelParams(mu=mu, sigma=0.2, r=0.25)
        exponents.append(model_core.derive_coefficients(params).a)
        times.append(mfpt.mfpt_levels(params, 1.0, 2.0))
    assert all(np.diff(exponents) > 0)
    assert all(np.diff(times) > 0)
