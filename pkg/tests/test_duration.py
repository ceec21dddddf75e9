"""
Unit tests for the call-duration models.

This module contains tests for the following functionalities:
- Scale calibration against the five reference shapes.
- Conditional mean duration, its bounds and saturation.
- Conditional survival and the quantile horizon.
- Closed-form approximations and inverse-transform sampling.
- The empirical piecewise density.
"""

import math
from typing import Tuple

import numpy as np
import pytest

from classes.duration.empirical import EmpiricalDensity, empirical_density
from classes.duration.weibull import (
    DurationStats,
    WeibullModel,
    approx_conditional_mean,
    approx_horizon,
    calibrate_scale,
    conditional_mean_bounds,
    conditional_mean_remaining,
    conditional_survival,
    mean_residual_life,
    quantile_horizon,
    residual_mean,
    sample_duration,
    table_one_models,
    weibull_stats,
)
from utils.constants import MEAN_CALL_DURATION, TABLE_ONE_CVS, TABLE_ONE_SCALES
from utils.exceptions import InvalidParameterError, SaturationError

GRID = range(0, 601, 10)


@pytest.fixture
def exponential() -> WeibullModel:
    """Provides the k=1 model with the reference mean call duration."""
    return calibrate_scale(1.0, MEAN_CALL_DURATION)


@pytest.fixture
def heavy_tail() -> WeibullModel:
    """Provides the k=0.5 model with the reference mean call duration."""
    return calibrate_scale(0.5, MEAN_CALL_DURATION)


def test_table_one_calibration() -> None:
    """
    Test that calibrating to the reference mean reproduces the published scales and cvs.
    """
    for model, lam, cv in zip(table_one_models(), TABLE_ONE_SCALES, TABLE_ONE_CVS):
        assert model.lam == pytest.approx(lam, rel=5e-3)
        assert abs(weibull_stats(model).cv - cv) <= 0.01
        assert model.mean == pytest.approx(MEAN_CALL_DURATION, rel=1e-12)


@pytest.mark.parametrize("k, lam", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, math.inf)])
def test_weibull_rejects_bad_parameters(k: float, lam: float) -> None:
    """
    Test that non-positive or non-finite parameters are rejected.

    Args:
        k (float): Shape parameter.
        lam (float): Scale parameter.
    """
    with pytest.raises(InvalidParameterError):
        WeibullModel(k=k, lam=lam)


def test_duration_stats_checks_cv() -> None:
    """
    Test that DurationStats refuses a cv that disagrees with its moments.
    """
    assert DurationStats.from_moments(100.0, 50.0).cv == pytest.approx(0.5)
    with pytest.raises(InvalidParameterError):
        DurationStats(mean=100.0, std_dev=50.0, cv=0.6)


def test_survival_rejects_negative_time(exponential: WeibullModel) -> None:
    """
    Test that survival refuses negative elapsed time.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    assert exponential.survival(0.0) == 1.0
    with pytest.raises(InvalidParameterError):
        exponential.survival(-1.0)


def test_exponential_is_memoryless(exponential: WeibullModel) -> None:
    """
    Test that for k=1 the numeric conditional mean equals t + E(D).

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    for t in range(0, 601, 30):
        value = conditional_mean_remaining(exponential, float(t))
        assert abs(value - (t + exponential.mean)) / exponential.mean < 1e-6
        assert mean_residual_life(exponential, float(t)) == pytest.approx(exponential.mean)


def test_conditional_mean_heavy_tail(heavy_tail: WeibullModel) -> None:
    """
    Test E(D|D>60) for the k=0.5 model against its closed form.

    Args:
        heavy_tail (WeibullModel): The k=0.5 model.
    """
    assert conditional_mean_remaining(heavy_tail, 60.0) == pytest.approx(295.94, abs=0.05)


def test_conditional_mean_bounds_hold_on_grid() -> None:
    """
    Test that max(t, E(D)) <= E(D|D>t) <= E(D)/S(t) for every shape and grid point.
    """
    for model in table_one_models():
        slack = 1e-9 * model.mean
        for t in GRID:
            lower, upper = conditional_mean_bounds(model, float(t))
            value = conditional_mean_remaining(model, float(t))
            assert lower - slack <= value <= upper + slack


def test_residual_mean_of_exponential(exponential: WeibullModel) -> None:
    """
    Test that the residual mean equals E(D) when cv is 1.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    assert residual_mean(weibull_stats(exponential)) == pytest.approx(exponential.mean)


def test_conditional_mean_saturates() -> None:
    """
    Test that a survival probability below double range raises SaturationError.
    """
    model = calibrate_scale(3.4, MEAN_CALL_DURATION)
    with pytest.raises(SaturationError):
        conditional_mean_remaining(model, 10000.0)
    lower, upper = conditional_mean_bounds(model, 10000.0)
    assert lower == 10000.0
    assert upper == math.inf


@pytest.mark.parametrize("xi", [0.8, 0.9, 0.95])
def test_quantile_round_trip(xi: float) -> None:
    """
    Test that the conditional survival up to the quantile horizon equals xi.

    Args:
        xi (float): Required survival probability.
    """
    for model in table_one_models():
        for t in GRID:
            horizon = quantile_horizon(model, float(t), xi)
            assert horizon >= t
            assert conditional_survival(model, float(t), horizon) == pytest.approx(xi, abs=1e-9)


def test_quantile_horizon_edges(exponential: WeibullModel) -> None:
    """
    Test the xi=1 edge case and the rejected inputs of the quantile horizon.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    assert quantile_horizon(exponential, 42.0, 1.0) == 42.0
    with pytest.raises(InvalidParameterError):
        quantile_horizon(exponential, 0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        quantile_horizon(exponential, -1.0, 0.9)
    with pytest.raises(InvalidParameterError):
        conditional_survival(exponential, 10.0, 5.0)


def test_approximation_anchors() -> None:
    """
    Test the closed-form fits at cv=1 and t=1 min against the exponential values.
    """
    assert approx_conditional_mean(1.0, 1.0) == pytest.approx(2.955, rel=0.02)
    assert approx_horizon(1.0, 1.0) == pytest.approx(1.436, rel=0.02)


def test_sample_duration(exponential: WeibullModel) -> None:
    """
    Test inverse-transform sampling against the model mean and its domain checks.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    samples = exponential.sample(np.random.default_rng(7), 200_000)
    assert samples.mean() == pytest.approx(exponential.mean, rel=0.01)
    assert sample_duration(exponential, math.exp(-1.0)) == pytest.approx(exponential.lam)
    with pytest.raises(InvalidParameterError):
        sample_duration(exponential, 0.0)
    with pytest.raises(InvalidParameterError):
        sample_duration(exponential, np.array([0.5, 1.0]))


@pytest.fixture(scope="module")
def empirical() -> EmpiricalDensity:
    """Provides the renormalized empirical density."""
    return EmpiricalDensity()


def test_empirical_density_is_normalized(empirical: EmpiricalDensity) -> None:
    """
    Test that the empirical density integrates to one over its support.

    Args:
        empirical (EmpiricalDensity): The empirical density.
    """
    assert empirical.cdf(455.0) == 1.0
    assert empirical.cdf(0.0) == 0.0
    assert empirical.cdf(200.0) == pytest.approx(1.0 - empirical.survival(200.0))
    assert empirical_density(1000.0) == 0.0
    assert empirical_density(-1.0) == 0.0


def test_empirical_conditional_mean(empirical: EmpiricalDensity) -> None:
    """
    Test that E(D|D>t) grows past t and saturates at the end of the support.

    Args:
        empirical (EmpiricalDensity): The empirical density.
    """
    bounds: Tuple[float, float] = empirical.support
    value = empirical.conditional_mean_remaining(100.0)
    assert 100.0 < value < bounds[1]
    with pytest.raises(SaturationError):
        empirical.conditional_mean_remaining(455.0)
    with pytest.raises(InvalidParameterError):
        empirical.conditional_mean_remaining(-1.0)
