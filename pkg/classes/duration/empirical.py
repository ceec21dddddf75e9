"""
Empirical call-duration density

Piecewise analytic fit of the FastWeb call-duration histogram: a
log-normal-shaped branch below 27.5 s and above 66.5 s, and a two-exponential
mixture in between. The published branches do not integrate to one, so the
density is renormalized numerically over its [0, 455] s support.
"""

import math
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.integrate import quad

from classes.duration.weibull import DurationStats
from utils.constants import EMPIRICAL_BREAKS, EMPIRICAL_SUPPORT
from utils.exceptions import InvalidParameterError, SaturationError

ArrayLike = Union[float, np.ndarray]

_LOGNORMAL_SIGMA: float = 1.55
_LOGNORMAL_MU: float = 3.8
_LOGNORMAL_DENOMINATOR: float = 4.805


def _lognormal_branch(t: np.ndarray) -> np.ndarray:
    safe = np.where(t > 0, t, 1.0)
    value = np.exp(-((np.log(safe) - _LOGNORMAL_MU) ** 2) / _LOGNORMAL_DENOMINATOR) / (
        _LOGNORMAL_SIGMA * safe * math.sqrt(2.0 * math.pi)
    )
    return np.where(t > 0, value, 0.0)


def _mixture_branch(t: np.ndarray) -> np.ndarray:
    return 0.000114 * np.exp(-0.00114 * t) + 0.027252 * np.exp(-0.03028 * t)


class EmpiricalDensity:
    """
    Renormalized piecewise density of call durations.

    Attributes:
        support (Tuple[float, float]): Interval outside of which the density is zero.
        normalization (float): Factor that makes the density integrate to one.
    """

    def __init__(self) -> None:
        self.support: Tuple[float, float] = EMPIRICAL_SUPPORT
        self.breaks: Tuple[float, float] = EMPIRICAL_BREAKS
        area = self._integrate(self.unnormalized, *self.support)
        self.normalization: float = 1.0 / area

    def _integrate(self, func, lower: float, upper: float) -> float:
        points = [b for b in self.breaks if lower < b < upper]
        value, _ = quad(func, lower, upper, points=points or None, epsabs=1e-13, limit=200)
        return value

    def unnormalized(self, t: ArrayLike) -> ArrayLike:
        """
        Evaluate the published branches without renormalization.

        Branches: [0, 27.5) log-normal form, [27.5, 66.5] exponential mixture,
        (66.5, 455] log-normal form, zero elsewhere.
        """
        t_arr = np.asarray(t, dtype=float)
        low, high = self.breaks
        result = np.where(
            (t_arr >= low) & (t_arr <= high), _mixture_branch(t_arr), _lognormal_branch(t_arr)
        )
        result = np.where((t_arr < self.support[0]) | (t_arr > self.support[1]), 0.0, result)
        return float(result) if np.ndim(result) == 0 else result

    def pdf(self, t: ArrayLike) -> ArrayLike:
        return self.normalization * self.unnormalized(t)

    __call__ = pdf

    def cdf(self, t: ArrayLike) -> ArrayLike:
        def scalar_cdf(x: float) -> float:
            if x <= self.support[0]:
                return 0.0
            if x >= self.support[1]:
                return 1.0
            return min(1.0, self._integrate(self.pdf, self.support[0], x))

        if np.ndim(t) == 0:
            return scalar_cdf(float(t))
        return np.array([scalar_cdf(float(x)) for x in np.asarray(t, dtype=float)])

    def survival(self, t: ArrayLike) -> ArrayLike:
        if np.any(np.asarray(t) < 0):
            raise InvalidParameterError(f"time must be non-negative, got {t}")
        return 1.0 - self.cdf(t)

    def stats(self) -> DurationStats:
        lower, upper = self.support
        mean = self._integrate(lambda x: x * self.pdf(x), lower, upper)
        second = self._integrate(lambda x: x * x * self.pdf(x), lower, upper)
        return DurationStats.from_moments(mean, math.sqrt(max(second - mean * mean, 0.0)))

    def conditional_mean_remaining(self, t: float) -> float:
        """
        E(D|D>t) from the first form of the definition, int x f / int f over [t, 455].

        Raises:
            InvalidParameterError: If t is negative.
            SaturationError: If no probability mass remains beyond t.
        """
        if t < 0:
            raise InvalidParameterError(f"time must be non-negative, got {t}")
        lower, upper = max(t, self.support[0]), self.support[1]
        if lower >= upper:
            raise SaturationError(f"no call survives past t={t} s under the empirical density")
        mass = self._integrate(self.pdf, lower, upper)
        if mass <= 0.0:
            raise SaturationError(f"no call survives past t={t} s under the empirical density")
        return self._integrate(lambda x: x * self.pdf(x), lower, upper) / mass


def empirical_density(t: ArrayLike) -> ArrayLike:
    """Normalized empirical density f_D(t) in 1/s."""
    return _default_density().pdf(t)


@lru_cache(maxsize=1)
def _default_density() -> EmpiricalDensity:
    return EmpiricalDensity()
