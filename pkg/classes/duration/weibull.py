"""
Weibull call-duration model

This module holds the two-parameter Weibull description of VoIP call
durations together with the survival analytics the insertion-rate
controllers are built on: conditional survival, the conditional expected
duration E(D|D>t), the quantile horizon T_xi(t) and the two published
minute-scale approximations.

All times are in seconds except for approx_conditional_mean and
approx_horizon, which take and return minutes.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from utils.constants import (
    LOG_SURVIVAL_FLOOR,
    MEAN_CALL_DURATION,
    TABLE_ONE_SHAPES,
    TAIL_ABS_TOLERANCE,
    TAIL_TRUNCATION,
)
from utils.exceptions import InvalidParameterError, SaturationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class DurationStats:
    """
    Moments of a call-duration distribution.

    Attributes:
        mean (float): Expected call duration E(D) in seconds.
        std_dev (float): Standard deviation sigma(D) in seconds.
        cv (float): Coefficient of variation sigma(D)/E(D).
    """

    mean: float
    std_dev: float
    cv: float

    def __post_init__(self) -> None:
        if not self.mean > 0:
            raise InvalidParameterError(f"mean must be positive, got {self.mean}")
        if self.std_dev < 0:
            raise InvalidParameterError(f"std_dev must be non-negative, got {self.std_dev}")
        if not math.isclose(self.cv, self.std_dev / self.mean, rel_tol=1e-9, abs_tol=1e-12):
            raise InvalidParameterError("cv must equal std_dev / mean")

    @classmethod
    def from_moments(cls, mean: float, std_dev: float) -> "DurationStats":
        return cls(mean=mean, std_dev=std_dev, cv=std_dev / mean)


@dataclass(frozen=True)
class WeibullModel:
    """
    Two-parameter Weibull call-duration distribution.

    Attributes:
        k (float): Shape parameter, dimensionless.
        lam (float): Scale parameter in seconds.
    """

    k: float
    lam: float

    def __post_init__(self) -> None:
        if not (self.k > 0 and math.isfinite(self.k)):
            raise InvalidParameterError(f"shape k must be positive, got {self.k}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameterError(f"scale lambda must be positive, got {self.lam}")

    @property
    def mean(self) -> float:
        return self.lam * float(gamma(1.0 + 1.0 / self.k))

    def log_survival(self, t: ArrayLike) -> ArrayLike:
        return -np.power(np.asarray(t, dtype=float) / self.lam, self.k)

    def survival(self, t: ArrayLike) -> ArrayLike:
        """
        Complementary CDF P(D > t) = exp(-(t/lambda)^k).

        Args:
            t (float | np.ndarray): Elapsed time in seconds, non-negative.

        Returns:
            float | np.ndarray: Survival probability.

        Raises:
            InvalidParameterError: If any t is negative.
        """
        _check_times(t)
        result = np.exp(self.log_survival(t))
        return float(result) if np.ndim(result) == 0 else result

    def cdf(self, t: ArrayLike) -> ArrayLike:
        t_arr = np.clip(np.asarray(t, dtype=float), 0.0, None)
        result = -np.expm1(self.log_survival(t_arr))
        return float(result) if np.ndim(result) == 0 else result

    def pdf(self, t: ArrayLike) -> ArrayLike:
        t_arr = np.asarray(t, dtype=float)
        scaled = np.clip(t_arr, 0.0, None) / self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            density = self.k / self.lam * np.power(scaled, self.k - 1.0)
        result = np.where(t_arr < 0, 0.0, density * np.exp(-np.power(scaled, self.k)))
        return float(result) if np.ndim(result) == 0 else result

    def stats(self) -> DurationStats:
        return weibull_stats(self)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw call durations by inverse-transform sampling."""
        u = rng.random(size)
        # Generator.random() is on [0, 1); zero maps to an infinite duration
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        return sample_duration(self, u)


def _check_times(t: ArrayLike) -> None:
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError(f"time must be non-negative, got {t}")


def weibull_stats(model: WeibullModel) -> DurationStats:
    """
    Mean, standard deviation and coefficient of variation of a Weibull model.

    Args:
        model (WeibullModel): The distribution.

    Returns:
        DurationStats: E(D) = lambda*G(1+1/k) and C_V from the gamma-function moments.
    """
    g1 = float(gamma(1.0 + 1.0 / model.k))
    g2 = float(gamma(1.0 + 2.0 / model.k))
    mean = model.lam * g1
    std_dev = model.lam * math.sqrt(max(g2 - g1 * g1, 0.0))
    return DurationStats(mean=mean, std_dev=std_dev, cv=std_dev / mean)


def calibrate_scale(k: float, target_mean: float) -> WeibullModel:
    """
    Pick the scale so that the model has the requested mean duration.

    Args:
        k (float): Shape parameter.
        target_mean (float): Desired E(D) in seconds.

    Returns:
        WeibullModel: Model with lambda = target_mean / G(1+1/k).

    Raises:
        InvalidParameterError: If k or target_mean is not positive.
    """
    if not k > 0:
        raise InvalidParameterError(f"shape k must be positive, got {k}")
    if not target_mean > 0:
        raise InvalidParameterError(f"target mean must be positive, got {target_mean}")
    return WeibullModel(k=k, lam=target_mean / float(gamma(1.0 + 1.0 / k)))


def table_one_models(mean: float = MEAN_CALL_DURATION) -> Tuple[WeibullModel, ...]:
    """Models for the five analysed shapes, all calibrated to the same mean."""
    return tuple(calibrate_scale(k, mean) for k in TABLE_ONE_SHAPES)


def survival(model: WeibullModel, t: float) -> float:
    return model.survival(t)


def conditional_survival(model: WeibullModel, t: float, horizon: float) -> float:
    """
    P(D > T | D > t) for T >= t.

    The exponent is (T^k - t^k)/lambda^k; this is the form the quantile horizon
    inverts, evaluated as a difference of scaled powers to stay finite for
    large t.

    Args:
        model (WeibullModel): The distribution.
        t (float): Elapsed call time in seconds.
        horizon (float): Future instant T in seconds.

    Raises:
        InvalidParameterError: If t is negative or horizon < t.
    """
    _check_times(t)
    if horizon < t:
        raise InvalidParameterError(f"horizon {horizon} precedes elapsed time {t}")
    exponent = (horizon / model.lam) ** model.k - (t / model.lam) ** model.k
    return math.exp(-exponent)


def residual_mean(stats: DurationStats) -> float:
    """Average residual duration seen from a random instant, (C_V^2 + 1)/2 * E(D)."""
    return (stats.cv**2 + 1.0) / 2.0 * stats.mean


@lru_cache(maxsize=65536)
def _relative_tail_integral(k: float, lam: float, t: float) -> float:
    # integral of S(x)/S(t) over [t, inf), truncated where S(x)/S(t) < TAIL_TRUNCATION
    offset = (t / lam) ** k
    if -offset < LOG_SURVIVAL_FLOOR:
        raise SaturationError(
            f"survival at t={t} s underflows for k={k}, lambda={lam}; E(D|D>t) is undefined"
        )
    upper = lam * (offset - math.log(TAIL_TRUNCATION)) ** (1.0 / k)

    def integrand(x: float) -> float:
        return math.exp(offset - (x / lam) ** k)

    value, abserr = quad(
        integrand, t, upper, epsabs=TAIL_ABS_TOLERANCE * lam, epsrel=1e-12, limit=500
    )
    if abserr > 1e-6 * max(value, 1.0):
        logger.warning("tail integral at t=%s has error estimate %.3g", t, abserr)
    return value


def conditional_mean_remaining(model: WeibullModel, t: float) -> float:
    """
    Expected total call duration given that the call has lasted t seconds.

    E(D|D>t) = t + (1/S(t)) * integral_t^inf S(x) dx, computed by adaptive
    quadrature of the survival ratio.

    Args:
        model (WeibullModel): The distribution.
        t (float): Elapsed time in seconds.

    Returns:
        float: E(D|D>t) in seconds.

    Raises:
        InvalidParameterError: If t is negative.
        SaturationError: If S(t) underflows double precision.
    """
    _check_times(t)
    return t + _relative_tail_integral(model.k, model.lam, float(t))


def mean_residual_life(model: WeibullModel, t: float) -> float:
    """E(D - t | D > t), the expected remaining talk time."""
    return conditional_mean_remaining(model, t) - t


def conditional_mean_bounds(model: WeibullModel, t: float) -> Tuple[float, float]:
    """
    Admissible region for E(D|D>t).

    Returns:
        Tuple[float, float]: (max(t, E(D)), E(D)/S(t)); the upper bound is inf
        once S(t) underflows.
    """
    _check_times(t)
    mean = model.mean
    log_s = float(model.log_survival(t))
    upper = math.inf if log_s < LOG_SURVIVAL_FLOOR else mean * math.exp(-log_s)
    return max(t, mean), upper


def quantile_horizon(model: WeibullModel, t: float, xi: float) -> float:
    """
    Latest instant T that the call still reaches with probability at least xi.

    T_xi(t) = (t^k - lambda^k ln xi)^(1/k).

    Args:
        model (WeibullModel): The distribution.
        t (float): Elapsed time in seconds.
        xi (float): Required probability, 0 < xi <= 1.

    Raises:
        InvalidParameterError: If xi is outside (0, 1] or t is negative.
    """
    _check_times(t)
    if not 0.0 < xi <= 1.0:
        raise InvalidParameterError(f"xi must lie in (0, 1], got {xi}")
    if xi == 1.0:
        return float(t)
    return model.lam * ((t / model.lam) ** model.k - math.log(xi)) ** (1.0 / model.k)


def approx_conditional_mean(cv: float, t_minutes: float) -> float:
    """Closed-form fit of E(D|D>t) in minutes: 1.32 C_V + t sqrt(C_V) + 0.59."""
    return 1.32 * cv + t_minutes * math.sqrt(cv) + 0.59


def approx_horizon(cv: float, t_minutes: float) -> float:
    """
    Closed-form fit of T_xi(t) in minutes, valid for xi = 0.8 only.

    -0.06 C_V^2 + C_V (0.05 t + 0.32) + 0.95 t + 0.17
    """
    return -0.06 * cv**2 + cv * (0.05 * t_minutes + 0.32) + 0.95 * t_minutes + 0.17


def sample_duration(model: WeibullModel, u: ArrayLike) -> ArrayLike:
    """
    Inverse-transform sample: the duration whose survival equals u.

    Args:
        model (WeibullModel): The distribution.
        u (float | np.ndarray): Uniform draw(s) strictly inside (0, 1).

    Returns:
        float | np.ndarray: lambda * (-ln u)^(1/k) seconds.

    Raises:
        InvalidParameterError: If any draw lies outside (0, 1).
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0.0) | (u_arr >= 1.0)):
        raise InvalidParameterError("uniform draws must lie strictly inside (0, 1)")
    result = model.lam * np.power(-np.log(u_arr), 1.0 / model.k)
    return float(result) if np.ndim(result) == 0 else result
