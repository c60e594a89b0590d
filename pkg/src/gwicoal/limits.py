"""Samplers and estimators for the limiting laws the finite-n statistics
converge to: mixtures of exponential clan masses and the truncated clan-mass
point measure, the closed-form tail of the oldest surviving clan, and the
gamma law of the rescaled population size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .distributions import (
    ClanMassSampler,
    ModelParams,
    PointMeasure,
    sample_negative_binomial,
)
from .errors import DomainError, EmptySample
from .stats import EstimateWithCI

DEFAULT_EPSILON = 1e-6
_BLOCK = 1 << 14
_MAX_RESAMPLE_ROUNDS = 64


@dataclass
class LimitSample:
    """One draw of the limiting clan-mass configuration: the early-founded
    clans carry explicit exponential masses, later clans live in the atoms of
    the truncated point measure."""

    n_clans: int
    clan_masses: np.ndarray
    immigration_measure: PointMeasure

    def __post_init__(self) -> None:
        masses = np.asarray(self.clan_masses, dtype=float)
        if masses.size != self.n_clans:
            raise DomainError("clan_masses must hold exactly n_clans entries")
        if masses.size and not np.all(masses > 0.0):
            raise DomainError("clan masses must be positive")
        self.clan_masses = masses


def mass_collision_ratio(sample: LimitSample) -> float:
    """Probability that two independent mass-weighted picks land in the same
    clan: (sum of squared masses) / (total mass)^2, always in (0, 1].

    Raises:
        EmptySample: no clans and no atoms, so the ratio is undefined.
    """
    linear = float(sample.clan_masses.sum()) + sample.immigration_measure.linear_sum
    if linear <= 0.0:
        raise EmptySample("a limit draw produced no mass at all")
    square = float((sample.clan_masses**2).sum()) + sample.immigration_measure.square_sum
    return square / (linear * linear)


def sample_limit_draw(u: float, params: ModelParams, epsilon: float,
                      rng: np.random.Generator) -> LimitSample:
    """Draw one limiting clan configuration at time fraction u."""
    n_clans = sample_negative_binomial(params.gamma, u, rng)
    masses = rng.exponential(params.sigma2 / 2.0, size=n_clans)
    measure = ClanMassSampler(params.gamma, params.sigma2, epsilon).sample(rng)
    return LimitSample(n_clans, masses, measure)


@dataclass(frozen=True)
class LimitValue:
    """A limit constant estimated by Monte Carlo, with its provenance."""

    value: float
    stderr: float
    draws: int
    epsilon: float | None
    bias_bound: float
    resamples: int

    def as_estimate(self) -> EstimateWithCI:
        return EstimateWithCI(self.value, self.stderr, self.draws, 1.0)


def _segment_sums(rng: np.random.Generator, counts: np.ndarray, scale: float):
    flat = rng.exponential(scale, int(counts.sum()))
    # sum within each draw directly; cumsum differences cancel badly when a
    # draw holds a single tiny mass
    owner = np.repeat(np.arange(counts.size), counts)
    linear = np.bincount(owner, weights=flat, minlength=counts.size)
    square = np.bincount(owner, weights=flat * flat, minlength=counts.size)
    return linear, square


def _ratio_mc(draws: int, rng: np.random.Generator, block_sums) -> tuple:
    """Average (sum of squares) / (sum)^2 over blocks of configuration draws.

    block_sums(rng, size) must return (linear, square) mass summaries; draws
    with zero total mass are resampled and counted.
    """
    if draws < 1:
        raise DomainError("need at least one draw")
    total = 0.0
    total_sq = 0.0
    resamples = 0
    done = 0
    while done < draws:
        size = min(_BLOCK, draws - done)
        linear, square = block_sums(rng, size)
        for _ in range(_MAX_RESAMPLE_ROUNDS):
            empty = linear <= 0.0
            n_empty = int(empty.sum())
            if n_empty == 0:
                break
            resamples += n_empty
            linear[empty], square[empty] = block_sums(rng, n_empty)
        else:
            raise EmptySample("resampling kept producing empty configurations")
        ratio = square / (linear * linear)
        if np.any(ratio > 1.0 + 1e-9):
            raise DomainError("collision ratio left (0, 1]; sampler is inconsistent")
        total += float(ratio.sum())
        total_sq += float((ratio * ratio).sum())
        done += size
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0)
    return mean, float(np.sqrt(var / draws)), resamples


def limit_pairwise_window(u: float, params: ModelParams, draws: int,
                          rng: np.random.Generator, *,
                          epsilon: float = DEFAULT_EPSILON) -> LimitValue:
    """Limit of P(pair coalescence time >= u * n | two final particles).

    Each draw mixes a negative-binomial number of exponential clan masses with
    the atoms of the truncated clan-mass measure and evaluates the collision
    ratio; the estimate is the average over draws.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")
    sampler = ClanMassSampler(params.gamma, params.sigma2, epsilon)
    scale = params.sigma2 / 2.0

    def block(r: np.random.Generator, size: int):
        n_clans = sample_negative_binomial(params.gamma, u, r, size=size)
        lin_c, sq_c = _segment_sums(r, n_clans, scale)
        _, lin_w, sq_w = sampler.sample_sums(r, size)
        return lin_c + lin_w, sq_c + sq_w

    mean, stderr, resamples = _ratio_mc(draws, rng, block)
    return LimitValue(mean, stderr, draws, epsilon, sampler.bias_bound, resamples)


def limit_pairwise_finite(params: ModelParams, draws: int,
                          rng: np.random.Generator, *,
                          epsilon: float = DEFAULT_EPSILON) -> LimitValue:
    """Limit of P(a pair coalesces at all | two final particles): the
    collision ratio of the clan-mass measure alone."""
    sampler = ClanMassSampler(params.gamma, params.sigma2, epsilon)

    def block(r: np.random.Generator, size: int):
        _, lin_w, sq_w = sampler.sample_sums(r, size)
        return lin_w, sq_w

    mean, stderr, resamples = _ratio_mc(draws, rng, block)
    return LimitValue(mean, stderr, draws, epsilon, sampler.bias_bound, resamples)


def plain_gw_pairwise_limit(u: float, sigma2: float, draws: int,
                            rng: np.random.Generator) -> LimitValue:
    """Single-ancestor baseline limit of P(pair time >= u * n | two alive):
    collision ratio of a geometric number (at least one) of exponential
    clan masses."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")
    if not sigma2 > 0.0:
        raise DomainError("sigma2 must be positive")
    scale = sigma2 / 2.0

    def block(r: np.random.Generator, size: int):
        n_clans = r.geometric(1.0 - u, size=size)
        return _segment_sums(r, n_clans, scale)

    mean, stderr, resamples = _ratio_mc(draws, rng, block)
    return LimitValue(mean, stderr, draws, None, 0.0, resamples)


def oldest_clan_tail_limit(u: float, gamma_: float) -> float:
    """Limit of P(the oldest surviving clan was founded after u * n):
    (1 - u) ** gamma."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")
    if not gamma_ > 0.0:
        raise DomainError("gamma must be positive")
    return float((1.0 - u) ** gamma_)


def population_limit_cdf(t, params: ModelParams):
    """CDF of the limiting law of Z_n / n: gamma with shape gamma and rate
    2 / sigma2."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("the population limit lives on [0, infinity)")
    out = special.gammainc(params.gamma, 2.0 * arr / params.sigma2)
    return float(out) if arr.ndim == 0 else out


def population_limit_pdf(t, params: ModelParams):
    """Density of the limiting law of Z_n / n."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("the population limit lives on [0, infinity)")
    rate = 2.0 / params.sigma2
    out = np.exp(
        params.gamma * np.log(rate)
        + (params.gamma - 1.0) * np.log(np.where(arr > 0, arr, 1.0))
        - rate * arr
        - special.gammaln(params.gamma)
    )
    out = np.where(arr > 0, out, 0.0 if params.gamma != 1.0 else rate)
    return float(out) if arr.ndim == 0 else out


def composite_population_draws(u: float, params: ModelParams, draws: int,
                               rng: np.random.Generator, *,
                               epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Draws of (1 - u) * (early clan masses + clan-measure mass), which must
    reproduce the population limit law exactly; used as a consistency check
    between the split limit objects and the unsplit one."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")
    sampler = ClanMassSampler(params.gamma, params.sigma2, epsilon)
    scale = params.sigma2 / 2.0
    out = np.empty(draws)
    done = 0
    while done < draws:
        size = min(_BLOCK, draws - done)
        n_clans = sample_negative_binomial(params.gamma, u, rng, size=size)
        lin_c, _ = _segment_sums(rng, n_clans, scale)
        _, lin_w, _ = sampler.sample_sums(rng, size)
        total = lin_c + lin_w
        for _ in range(_MAX_RESAMPLE_ROUNDS):
            empty = total <= 0.0
            n_empty = int(empty.sum())
            if n_empty == 0:
                break
            n2 = sample_negative_binomial(params.gamma, u, rng, size=n_empty)
            lc, _ = _segment_sums(rng, n2, scale)
            _, lw, _ = sampler.sample_sums(rng, n_empty)
            total[empty] = lc + lw
        out[done : done + size] = (1.0 - u) * total
        done += size
    return out
