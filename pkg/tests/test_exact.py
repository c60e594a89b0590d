"""Closed-form references and the brute-force enumeration oracle."""

from fractions import Fraction

import numpy as np
import pytest

from gwicoal.distributions import critical_geometric_law, validate_model
from gwicoal.errors import DomainError, ExplosionError
from gwicoal.exact import (
    empty_population_probability,
    enumerate_tiny,
    exact_pairwise_prob,
    extinction_probabilities,
    pairwise_mrca_counts,
    sole_survivor_curve,
    sole_survivor_probability,
    survival_probabilities,
)
from gwicoal.simulator import simulate_forest

DEFAULT = validate_model((0.5, 0.0, 0.5), (0.5, 0.5))
SECOND = validate_model((0.25, 0.5, 0.25), (0.5, 0.25, 0.25))


def test_geometric_survival_is_harmonic():
    # the closed-form family: q_n = 1/(n+1), exactly
    law = critical_geometric_law()
    q = survival_probabilities(law, 100)
    want = 1.0 / (np.arange(101) + 1.0)
    assert np.abs(q - want).max() < 1e-12


def test_survival_decay_rate():
    q = survival_probabilities(DEFAULT.offspring, 10_000)
    # n * q_n approaches 2 / sigma2
    assert abs(10_000 * q[-1] - 2.0 / DEFAULT.sigma2) < 0.02 * 2.0 / DEFAULT.sigma2


def test_survival_against_fraction_iteration():
    # independent oracle: exact rational pgf iteration; the denominators
    # square every step, so stop while they still fit in a few kilobits
    q = survival_probabilities(DEFAULT.offspring, 14)
    frac = Fraction(1)
    for j in range(1, 15):
        s = 1 - frac
        frac = 1 - (Fraction(1, 2) + Fraction(1, 2) * s * s)
        assert abs(q[j] - float(frac)) < 1e-14, f"n={j}"


def test_extinction_complements_survival():
    a = extinction_probabilities(DEFAULT.offspring, 20)
    q = survival_probabilities(DEFAULT.offspring, 20)
    assert np.abs(a + q - 1.0).max() == 0.0


def test_sole_survivor_small_values():
    # n=1 by hand: exactly one of the immigrant waves at 0 and 1 leaves a
    # live descendant line at generation 1
    assert sole_survivor_probability(DEFAULT, 1) == 0.5


def test_sole_survivor_against_fraction_oracle():
    # rebuild the product formula in exact rational arithmetic
    for params, b in ((DEFAULT, [Fraction(1, 2), Fraction(1, 2)]),
                      (SECOND, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)])):
        if params is DEFAULT:
            coeffs = [Fraction(1, 2), Fraction(0), Fraction(1, 2)]
        else:
            coeffs = [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
        q = [Fraction(1)]
        for _ in range(6):
            s = 1 - q[-1]
            q.append(1 - sum(c * s**j for j, c in enumerate(coeffs)))
        for n in range(1, 7):
            prod = Fraction(1)
            total = Fraction(0)
            for m in range(n + 1):
                a = 1 - q[m]
                bval = sum(c * a**j for j, c in enumerate(b))
                bprime = sum(j * c * a ** (j - 1) for j, c in enumerate(b) if j >= 1)
                prod *= bval
                total += bprime * q[m] / bval
            want = float(prod * total)
            assert abs(sole_survivor_probability(params, n) - want) < 1e-14, f"n={n}"


def test_sole_survivor_curve_decreases_after_start():
    curve = sole_survivor_curve(DEFAULT, 5000)
    diffs = np.diff(curve[1:])
    assert np.all(diffs <= 1e-15)
    assert curve[5000] < 0.01


def test_empty_population_probability():
    # n=1: both waves die out: (b0 + b1*p0) * b0
    assert empty_population_probability(DEFAULT, 1) == pytest.approx(0.375, abs=1e-15)
    table = enumerate_tiny(DEFAULT, 2)
    assert empty_population_probability(DEFAULT, 2) == pytest.approx(
        table.z_law.get(0, 0.0), abs=1e-14
    )
    assert empty_population_probability(DEFAULT, 2) == pytest.approx(
        1.0 - table.p_final_gt0, abs=1e-14
    )


@pytest.mark.parametrize("params,n", [(DEFAULT, 1), (DEFAULT, 2), (DEFAULT, 3), (SECOND, 1), (SECOND, 2)])
def test_enumeration_is_a_probability_space(params, n):
    table = enumerate_tiny(params, n)
    assert table.prob_total == pytest.approx(1.0, abs=1e-12)
    assert abs(sum(table.z_law.values()) - 1.0) < 1e-12
    mean_z = sum(z * p for z, p in table.z_law.items())
    assert mean_z == pytest.approx(params.beta * (n + 1), abs=1e-12)


@pytest.mark.parametrize("params,n", [(DEFAULT, 1), (DEFAULT, 2), (DEFAULT, 3), (SECOND, 1), (SECOND, 2)])
def test_two_routes_to_the_pair_window_agree(params, n):
    table = enumerate_tiny(params, n)
    gap = np.abs(
        np.asarray(table.pairwise_window_definition)
        - np.asarray(table.pairwise_window_identity)
    ).max()
    assert gap <= 1e-12


def test_tiny_golden_values():
    table = enumerate_tiny(DEFAULT, 1)
    assert table.pairwise_finite_identity == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert table.pairwise_finite_definition == pytest.approx(2.0 / 3.0, abs=1e-15)
    # no survivors at n means the oldest-founder tail at k=n equals extinction
    assert table.tau_tail[1] == pytest.approx(table.z_law.get(0, 0.0), abs=1e-15)


@pytest.mark.parametrize("params,n", [(DEFAULT, 2), (SECOND, 2)])
def test_product_formula_matches_enumeration(params, n):
    table = enumerate_tiny(params, n)
    assert table.single_clan_prob == pytest.approx(
        sole_survivor_probability(params, n), abs=1e-12
    )
    # a finite all-particle time on a live population is the same event
    assert table.total_finite * table.p_final_gt0 == pytest.approx(
        table.single_clan_prob, abs=1e-12
    )


@pytest.mark.parametrize("params,n", [(DEFAULT, 2), (DEFAULT, 3), (SECOND, 2)])
def test_oldest_clan_tail_from_enumeration(params, n):
    # the oldest founder sits after k (or nothing survives, which counts as a
    # tail event) exactly when every wave arriving by k is extinct by n, so
    # tau_tail[k] must equal prod_{g <= k} B(a_{n-g})
    table = enumerate_tiny(params, n)
    a = 1.0 - survival_probabilities(params.offspring, n)
    b = params.immigration.pgf
    prod = 1.0
    for k in range(n + 1):
        prod *= b(a[n - k])
        assert table.tau_tail[k] == pytest.approx(prod, abs=1e-12), f"k={k}"
    assert table.tau_tail[n] == pytest.approx(table.z_law.get(0, 0.0), abs=1e-12)


def test_enumeration_history_cap():
    with pytest.raises(ExplosionError):
        enumerate_tiny(DEFAULT, 3, history_cap=100)


def test_exact_pairwise_prob():
    assert exact_pairwise_prob(DEFAULT, 1, 0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    with pytest.raises(DomainError):
        exact_pairwise_prob(DEFAULT, 2, 2)


def test_enumeration_matches_simulation():
    # the forward simulator and the exhaustive walk describe one model
    table = enumerate_tiny(DEFAULT, 2)
    rng = np.random.default_rng(424242)
    reps = 20_000
    hits = gt1 = gt0 = single = 0
    z_sum = 0
    for _ in range(reps):
        f = simulate_forest(DEFAULT, 2, rng)
        z = f.final_size
        z_sum += z
        if z > 0:
            gt0 += 1
            fg, fo = f.founder_gen[2], f.founder_ord[2]
            single += bool((fg == fg[0]).all() and (fo == fo[0]).all())
        if z > 1:
            gt1 += 1
            from gwicoal.simulator import pairwise_ratio_sample

            hits += pairwise_ratio_sample(f, 1)[0]
    est = hits / gt1
    want = table.pairwise_window_identity[1]
    se = 1.0 / np.sqrt(gt1)
    assert abs(est - want) < 4 * se
    est_single = single / gt0
    want_single = table.single_clan_prob / table.p_final_gt0
    se = np.sqrt(want_single * (1 - want_single) / gt0)
    assert abs(est_single - want_single) < 4 * se
    assert abs(z_sum / reps - DEFAULT.beta * 3) < 4 * np.sqrt(2.0 / reps)


def test_pairwise_mrca_counts_cover_all_pairs():
    rng = np.random.default_rng(99)
    seen = 0
    while seen < 25:
        f = simulate_forest(DEFAULT, int(rng.integers(2, 7)), rng)
        if f.final_size < 2:
            continue
        seen += 1
        counts, infinite = pairwise_mrca_counts(f)
        z = f.final_size
        assert counts.sum() + infinite == z * (z - 1) // 2


def test_survival_probabilities_domain():
    with pytest.raises(DomainError):
        survival_probabilities(DEFAULT.offspring, -1)
    with pytest.raises(DomainError):
        enumerate_tiny(DEFAULT, 0)
