"""Offspring and immigration laws, their generating functions, and samplers
for the limiting objects: negative-binomial clan counts and the truncated
clan-mass point measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import (
    DegenerateOffspring,
    DomainError,
    GwicoalError,
    NoImmigration,
    NotAProbability,
    NotCritical,
)

PMF_TOLERANCE = 1e-12
CRITICALITY_TOLERANCE = 1e-9

INVERSE_CDF_KNOTS = 4096
# per-atom probability mass allowed beyond the last table knot
_TABLE_TAIL_FRACTION = 1e-14
_TABLE_QUAD_TOLERANCE = 1e-9


@dataclass
class DiscreteLaw:
    """A finitely supported probability law on counts {0, ..., j_max}."""

    pmf: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)
    _dcoef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise NotAProbability("pmf must be a nonempty one-dimensional sequence")
        if not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
            raise NotAProbability("pmf entries must be finite and nonnegative")
        total = float(pmf.sum())
        if abs(total - 1.0) > PMF_TOLERANCE:
            raise NotAProbability(f"pmf sums to {total!r}, not 1 within {PMF_TOLERANCE}")
        self.pmf = pmf
        self._cdf = np.cumsum(pmf)
        self._cdf[-1] = 1.0
        self._dcoef = pmf[1:] * np.arange(1, pmf.size)

    @property
    def j_max(self) -> int:
        return self.pmf.size - 1

    def mean(self) -> float:
        return float(np.arange(self.pmf.size) @ self.pmf)

    def pgf(self, s):
        """Evaluate sum_j pmf[j] * s**j for s in [0, 1]."""
        arr = self._check_unit_interval(s)
        out = np.polynomial.polynomial.polyval(arr, self.pmf)
        return float(out) if np.isscalar(s) or arr.ndim == 0 else out

    def pgf_prime(self, s):
        """Evaluate the derivative sum_j j * pmf[j] * s**(j-1) for s in [0, 1]."""
        arr = self._check_unit_interval(s)
        if self._dcoef.size == 0:
            out = np.zeros_like(arr)
        else:
            out = np.polynomial.polynomial.polyval(arr, self._dcoef)
        return float(out) if np.isscalar(s) or arr.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        """Draw counts by inverse CDF; returns an int for size=None."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        if size is None:
            return int(idx)
        return idx.astype(np.int64)

    @staticmethod
    def _check_unit_interval(s) -> np.ndarray:
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError("generating functions are only evaluated on [0, 1]")
        return arr


@dataclass
class ModelParams:
    """A validated critical model: offspring and immigration laws plus the
    derived constants sigma2 = sum_j (j^2 - 1) p_j, beta = sum_j j b_j and
    gamma = 2 beta / sigma2."""

    offspring: DiscreteLaw
    immigration: DiscreteLaw
    mean_offspring: float
    sigma2: float
    beta: float
    gamma: float


def offspring_variance(offspring: DiscreteLaw) -> float:
    """sigma2 = sum_j (j^2 - 1) p_j, the variance when the mean is one."""
    j = np.arange(offspring.pmf.size, dtype=float)
    return float((j * j - 1.0) @ offspring.pmf)


def check_critical_offspring(offspring: DiscreteLaw) -> None:
    """Raise unless the offspring law is critical and non-degenerate."""
    p0 = float(offspring.pmf[0])
    p1 = float(offspring.pmf[1]) if offspring.pmf.size > 1 else 0.0
    low = p0 + p1
    if low <= 0.0 or low >= 1.0:
        raise DegenerateOffspring(
            f"p0 + p1 = {low!r} must lie strictly between 0 and 1"
        )
    mean = offspring.mean()
    if abs(mean - 1.0) > CRITICALITY_TOLERANCE:
        raise NotCritical(
            f"offspring mean {mean!r} differs from 1 by more than {CRITICALITY_TOLERANCE}"
        )
    if offspring_variance(offspring) <= 0.0:
        raise DegenerateOffspring("offspring variance must be positive")


def validate_model(offspring_pmf, immigration_pmf) -> ModelParams:
    """Build a ModelParams after checking every model requirement.

    Args:
        offspring_pmf: pmf of the offspring law, indexed from 0.
        immigration_pmf: pmf of the per-generation immigrant count.

    Returns:
        ModelParams with the derived constants filled in.

    Raises:
        NotAProbability: a pmf is malformed.
        DegenerateOffspring: p0 + p1 is 0 or 1.
        NotCritical: the offspring mean is not 1 within 1e-9.
        NoImmigration: immigrants never arrive.
    """
    offspring = DiscreteLaw(np.asarray(offspring_pmf, dtype=float))
    immigration = DiscreteLaw(np.asarray(immigration_pmf, dtype=float))
    check_critical_offspring(offspring)
    beta = immigration.mean()
    if float(immigration.pmf[0]) >= 1.0 - PMF_TOLERANCE or beta <= 0.0:
        raise NoImmigration("the immigration law must place mass above zero")
    sigma2 = offspring_variance(offspring)
    return ModelParams(
        offspring=offspring,
        immigration=immigration,
        mean_offspring=offspring.mean(),
        sigma2=sigma2,
        beta=beta,
        gamma=2.0 * beta / sigma2,
    )


def critical_geometric_law(j_max: int = 52) -> DiscreteLaw:
    """The critical geometric offspring law p_j = (1/2)**(j+1), truncated at
    j_max and renormalized.  The tail above 52 is below double precision, so
    the truncation keeps the mean at one to well under 1e-9."""
    if j_max < 2:
        raise DomainError("j_max must be at least 2")
    pmf = 0.5 ** (np.arange(j_max + 1, dtype=float) + 1.0)
    pmf /= pmf.sum()
    return DiscreteLaw(pmf)


def negative_binomial_pmf(gamma_: float, u: float, k) -> np.ndarray:
    """Exact pmf of the limiting early-clan count at integer points k.

    P(N = k) = Gamma(gamma_ + k) / (Gamma(gamma_) k!) * (1-u)**gamma_ * u**k.
    """
    _check_clan_count_domain(gamma_, u)
    karr = np.asarray(k, dtype=float)
    if np.any(karr < 0) or np.any(karr != np.floor(karr)):
        raise DomainError("pmf points must be nonnegative integers")
    logp = (
        special.gammaln(gamma_ + karr)
        - special.gammaln(gamma_)
        - special.gammaln(karr + 1.0)
        + gamma_ * np.log1p(-u)
        + karr * np.log(u)
    )
    return np.exp(logp)


def sample_negative_binomial(gamma_: float, u: float, rng: np.random.Generator, size=None):
    """Draw the limiting count of clans founded before the time split.

    Implemented as a Poisson draw with Gamma(gamma_, u/(1-u)) intensity, which
    reproduces the target pmf for any real gamma_ > 0.
    """
    _check_clan_count_domain(gamma_, u)
    lam = rng.gamma(gamma_, u / (1.0 - u), size=size)
    draw = rng.poisson(lam)
    if size is None:
        return int(draw)
    return draw.astype(np.int64)


def _check_clan_count_domain(gamma_: float, u: float) -> None:
    if not gamma_ > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma_!r}")
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")


@dataclass
class PointMeasure:
    """A finite atom list standing in for one truncated draw of the limiting
    clan-mass measure."""

    atoms: np.ndarray
    truncation_epsilon: float

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float)
        if self.truncation_epsilon < 0.0:
            raise DomainError("truncation_epsilon must be nonnegative")
        if atoms.size and not np.all(atoms > self.truncation_epsilon):
            raise DomainError("every atom must sit strictly above the truncation point")
        self.atoms = atoms

    @property
    def n_atoms(self) -> int:
        return int(self.atoms.size)

    @property
    def linear_sum(self) -> float:
        """Integral of r against the measure."""
        return float(self.atoms.sum())

    @property
    def square_sum(self) -> float:
        """Integral of r**2 against the measure."""
        return float((self.atoms * self.atoms).sum())


def truncation_bias_bound(gamma_: float, sigma2: float, epsilon: float) -> float:
    """Exact mean mass dropped below the truncation point:
    gamma * integral over (0, epsilon] of exp(-2 r / sigma2) dr, always <= gamma * epsilon."""
    if epsilon < 0.0:
        raise DomainError("epsilon must be nonnegative")
    rate = 2.0 / sigma2
    return float(gamma_ * (-np.expm1(-rate * epsilon)) / rate)


_TABLE_CACHE: dict = {}


def _inverse_cdf_table(sigma2: float, epsilon: float):
    """Inverse-CDF table for atom positions under the intensity
    (1/r) exp(-2 r / sigma2) restricted to (epsilon, infinity).

    The CDF is expressed through the exponential integral and tabulated on
    log-spaced knots; the table is checked against adaptive quadrature once,
    when built.
    """
    key = (float(sigma2), float(epsilon))
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    rate = 2.0 / sigma2
    total = float(special.exp1(rate * epsilon))
    target = _TABLE_TAIL_FRACTION * total
    upper = epsilon
    while float(special.exp1(rate * upper)) > target:
        upper *= 2.0
    knots = np.geomspace(epsilon, upper, INVERSE_CDF_KNOTS)
    cdf = 1.0 - special.exp1(rate * knots) / total
    cdf[0] = 0.0
    cdf[-1] = 1.0
    cdf = np.maximum.accumulate(cdf)
    _check_table_against_quadrature(knots, cdf, rate, total)
    _TABLE_CACHE[key] = (knots, cdf)
    return knots, cdf


def _check_table_against_quadrature(knots, cdf, rate, total) -> None:
    step = (INVERSE_CDF_KNOTS - 1) // 4
    for lo, hi in [(0, step), (step, 2 * step), (2 * step, INVERSE_CDF_KNOTS - 1)]:
        mass, _ = integrate.quad(
            lambda r: np.exp(-rate * r) / r, knots[lo], knots[hi], limit=200
        )
        if abs(mass / total - (cdf[hi] - cdf[lo])) > _TABLE_QUAD_TOLERANCE:
            raise GwicoalError(
                "inverse-CDF table failed its quadrature cross-check; "
                f"span ({knots[lo]!r}, {knots[hi]!r})"
            )


class ClanMassSampler:
    """Sampler for the truncated limiting clan-mass measure.

    The measure is a Poisson point process on (epsilon, infinity) with
    intensity (gamma / r) exp(-2 r / sigma2) dr.  The atom count is Poisson
    with mean gamma * E1(2 epsilon / sigma2) and positions come from a
    4096-knot inverse-CDF table with monotone interpolation.
    """

    def __init__(self, gamma_: float, sigma2: float, epsilon: float) -> None:
        if not gamma_ > 0.0 or not sigma2 > 0.0:
            raise DomainError("gamma and sigma2 must be positive")
        if not epsilon > 0.0:
            raise DomainError(
                "epsilon must be positive: the intensity is not integrable at zero"
            )
        self.gamma_ = float(gamma_)
        self.sigma2 = float(sigma2)
        self.epsilon = float(epsilon)
        self.mean_atoms = float(gamma_ * special.exp1(2.0 * epsilon / sigma2))
        self.bias_bound = truncation_bias_bound(gamma_, sigma2, epsilon)
        self._knots, self._cdf = _inverse_cdf_table(sigma2, epsilon)

    def sample(self, rng: np.random.Generator) -> PointMeasure:
        """Draw one point measure."""
        count = int(rng.poisson(self.mean_atoms))
        atoms = np.interp(rng.random(count), self._cdf, self._knots)
        return PointMeasure(atoms=atoms, truncation_epsilon=self.epsilon)

    def sample_sums(self, rng: np.random.Generator, size: int):
        """Draw `size` measures at once, returning only their summaries.

        Returns:
            (counts, linear, square): atom counts, sums of r and sums of r**2,
            one entry per draw.
        """
        counts = rng.poisson(self.mean_atoms, size=size)
        flat = np.interp(rng.random(int(counts.sum())), self._cdf, self._knots)
        # bincount sums within each draw; a running-cumsum difference would
        # cancel catastrophically on draws holding a single tiny atom
        owner = np.repeat(np.arange(size), counts)
        linear = np.bincount(owner, weights=flat, minlength=size)
        square = np.bincount(owner, weights=flat * flat, minlength=size)
        return counts.astype(np.int64), linear, square


def sample_clan_measure(
    params: ModelParams, epsilon: float, rng: np.random.Generator
) -> PointMeasure:
    """Draw one truncated clan-mass measure for a validated model."""
    return ClanMassSampler(params.gamma, params.sigma2, epsilon).sample(rng)
