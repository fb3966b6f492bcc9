# ghzsim/estimator.py
"""
Estimator statistics for parity-type field estimation.

With M repetitions and outcome probability p, the estimator

    Omega~ = (2 S - 1) / (N t_ex),   S = (number of +y outcomes) / M

has mean (2p - 1)/(N t_ex) and standard deviation 2 sqrt(p(1-p)/M)/(N t_ex).
When the true outcome model deviates from the assumed one, the bias survives
M -> infinity.
"""
from dataclasses import dataclass
from typing import Iterable, Tuple
import logging
import math

import numpy as np
from scipy.stats import binom

from .constants import PROBABILITY_SLACK
from .exceptions import InvalidArgumentError, ModelDomainError

logger = logging.getLogger("ghzsim.estimator")

# Inverse-CDF sampling up to this many trials, normal approximation above.
INVERSE_CDF_MAX_TRIALS = 10_000


@dataclass(frozen=True)
class EstimatorStats:
    mean: float
    bias: float
    std: float
    rmse: float
    rsd: float


@dataclass(frozen=True)
class BiasedModelStats(EstimatorStats):
    """Stats of a biased linear outcome model plus the rmse floor as M -> infinity."""

    asymptotic_rmse: float = 0.0


def _clip_probability(p: float) -> float:
    if not (-PROBABILITY_SLACK <= p <= 1 + PROBABILITY_SLACK):
        raise InvalidArgumentError(f"Probability must lie in [0, 1], got {p!r}")
    return min(max(p, 0.0), 1.0)


def _check_trials(trials) -> float:
    if not trials >= 1:
        raise InvalidArgumentError(f"Trial count must be at least 1, got {trials!r}")
    return float(trials)


def _scale(n_spins: int, t_ex: float) -> float:
    scale = n_spins * t_ex
    if not scale > 0:
        raise InvalidArgumentError(f"N * t_ex must be positive, got N={n_spins!r}, t_ex={t_ex!r}")
    return scale


def _relative(rmse: float, omega_true: float) -> float:
    return rmse / abs(omega_true) if omega_true != 0 else math.nan


def estimator_stats(
    p_actual: float,
    omega_true: float,
    n_spins: int,
    t_ex: float,
    trials: float,
) -> EstimatorStats:
    p = _clip_probability(p_actual)
    m = _check_trials(trials)
    scale = _scale(n_spins, t_ex)

    mean = (2 * p - 1) / scale
    bias = mean - omega_true
    std = (2 / scale) * math.sqrt(p * (1 - p) / m)
    rmse = math.hypot(std, bias)
    return EstimatorStats(mean=mean, bias=bias, std=std, rmse=rmse, rsd=_relative(rmse, omega_true))


def sample_successes(p_actual: float, trials: int, rng: np.random.Generator) -> int:
    """
    Binomial count k ~ B(M, p). Inverse CDF for small M, rounded and clipped
    normal approximation for large M; both consume exactly one draw from rng.
    """
    p = _clip_probability(p_actual)
    m = int(_check_trials(trials))
    if p == 0.0:
        return 0
    if p == 1.0:
        return m

    if m <= INVERSE_CDF_MAX_TRIALS:
        return int(max(binom.ppf(rng.random(), m, p), 0))

    sigma = math.sqrt(m * p * (1 - p))
    k = round(m * p + sigma * rng.standard_normal())
    return int(min(max(k, 0), m))


def monte_carlo_estimate(p_actual: float, n_spins: int, t_ex: float, trials: int, seed: int) -> float:
    scale = _scale(n_spins, t_ex)
    k = sample_successes(p_actual, trials, np.random.default_rng(seed))
    return (2 * k / int(trials) - 1) / scale


def monte_carlo_stats(
    p_actual: float,
    omega_true: float,
    n_spins: int,
    t_ex: float,
    trials: int,
    seeds: Iterable[int],
) -> EstimatorStats:
    """Empirical estimator statistics over independent seeded repetitions."""
    samples = np.array([monte_carlo_estimate(p_actual, n_spins, t_ex, trials, seed) for seed in seeds])
    if samples.size < 2:
        raise InvalidArgumentError("Monte Carlo statistics need at least two seeds")

    mean = float(np.mean(samples))
    bias = mean - omega_true
    std = float(np.std(samples, ddof=1))
    rmse = float(np.sqrt(np.mean((samples - omega_true) ** 2)))
    return EstimatorStats(mean=mean, bias=bias, std=std, rmse=rmse, rsd=_relative(rmse, omega_true))


def biased_linear_model(
    x: float,
    y: float,
    x_actual: float,
    y_actual: float,
    omega: float,
    trials: float,
) -> BiasedModelStats:
    """
    Estimator built for P = x + y Omega applied to data from P' = x' + y' Omega:

        <Omega~> = (y' Omega + x' - x) / y
        std      = sqrt(P'(1 - P')/M) / |y|
        floor    = |Omega (y' - y) + (x' - x)| / |y|
    """
    if y == 0:
        raise InvalidArgumentError("Model slope y must be nonzero")
    m = _check_trials(trials)

    p_actual = x_actual + y_actual * omega
    if not (-PROBABILITY_SLACK <= p_actual <= 1 + PROBABILITY_SLACK):
        raise ModelDomainError(f"Actual outcome probability {p_actual!r} lies outside [0, 1]")
    p_actual = min(max(p_actual, 0.0), 1.0)

    mean = (y_actual * omega + x_actual - x) / y
    bias = mean - omega
    std = math.sqrt(p_actual * (1 - p_actual) / m) / abs(y)
    rmse = math.hypot(std, bias)
    floor = abs(omega * (y_actual - y) + (x_actual - x)) / abs(y)
    return BiasedModelStats(
        mean=mean,
        bias=bias,
        std=std,
        rmse=rmse,
        rsd=_relative(rmse, omega),
        asymptotic_rmse=floor,
    )


def reference_curves(n_spins: int, omega: float, t_ex: float, trials: float) -> Tuple[float, float]:
    """(heisenberg_rsd, sql_rsd) for an ideal probe at P = 1/2."""
    m = _check_trials(trials)
    if omega == 0:
        raise InvalidArgumentError("Reference RSD curves need a nonzero field")
    denominator = t_ex * abs(omega)
    if not denominator > 0 or n_spins < 1:
        raise InvalidArgumentError(f"Invalid reference parameters: N={n_spins!r}, t_ex={t_ex!r}")

    heisenberg = 1 / (math.sqrt(m) * n_spins * denominator)
    sql = 1 / (math.sqrt(m * n_spins) * denominator)
    return heisenberg, sql


def ideal_ghz_probability(n_spins: int, omega: float, t: float) -> float:
    return 0.5 + math.sin(n_spins * omega * t) / 2


def single_spin_probability(omega: float, t: float) -> float:
    return ideal_ghz_probability(1, omega, t)
