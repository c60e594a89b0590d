"""Acceptance gate: one test per release criterion, run at fixed seeds.

Each test prints as its own pass/fail line under `pytest -v`.  The heavy
fixtures at the top are shared across criteria; the whole module takes around
five to six minutes on one core.  Tolerances are part of the contract and must
not be loosened to make a red line green.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from gwicoal.distributions import (
    ClanMassSampler,
    PointMeasure,
    critical_geometric_law,
    sample_negative_binomial,
    validate_model,
)
from gwicoal.exact import (
    enumerate_tiny,
    exact_pairwise_prob,
    survival_probabilities,
)
from gwicoal.harness import (
    ks_distance,
    ks_two_sample,
    run_finite_n,
    run_plain_gw_study,
    run_population_study,
    run_sweep,
)
from gwicoal.limits import (
    LimitSample,
    composite_population_draws,
    mass_collision_ratio,
    population_limit_cdf,
)

PARAMS = validate_model((0.5, 0.0, 0.5), (0.5, 0.5))
SECOND = validate_model((0.25, 0.5, 0.25), (0.5, 0.25, 0.25))
U_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)
SEED = 0
FINITE_REPLICATES = 20_000
LIMIT_DRAWS = 200_000

with open(os.path.join(os.path.dirname(__file__), "data", "limit_goldens.json")) as _fh:
    GOLDENS = json.load(_fh)


def _timed(fn, *args, **kwargs):
    t0 = time.monotonic()
    out = fn(*args, **kwargs)
    return out, time.monotonic() - t0


@pytest.fixture(scope="module")
def finite64():
    return run_finite_n(PARAMS, 64, U_GRID, FINITE_REPLICATES, SEED,
                        limit_draws=LIMIT_DRAWS)


@pytest.fixture(scope="module")
def finite128():
    return run_finite_n(PARAMS, 128, U_GRID, FINITE_REPLICATES, SEED,
                        limit_draws=LIMIT_DRAWS)


@pytest.fixture(scope="module")
def finite256():
    return run_finite_n(PARAMS, 256, U_GRID, FINITE_REPLICATES, SEED,
                        limit_draws=LIMIT_DRAWS)


@pytest.fixture(scope="module")
def horizon_one():
    return _timed(run_finite_n, PARAMS, 1, (0.5,), 100_000, SEED, limit_draws=0)


@pytest.fixture(scope="module")
def pop512():
    return _timed(run_population_study, PARAMS, 512, (0.25, 0.5, 0.75),
                  FINITE_REPLICATES, SEED)


@pytest.fixture(scope="module")
def sweep_report():
    return run_sweep(PARAMS, (64, 128, 256, 512), 0.5, 10_000, SEED)


@pytest.fixture(scope="module")
def plain_report():
    return run_plain_gw_study(PARAMS.offspring, 256, U_GRID, 400_000, SEED,
                              limit_draws=LIMIT_DRAWS)


def test_criterion_01_dual_route_identities_on_enumerable_models():
    # both pairwise routes (definition and clan identity) agree to 1e-12 on
    # every exhaustively enumerable instance, in under a minute
    t0 = time.monotonic()
    worst = 0.0
    for params, n_max in ((PARAMS, 3), (SECOND, 2)):
        for n in range(1, n_max + 1):
            table = enumerate_tiny(params, n)
            gap = np.abs(
                np.asarray(table.pairwise_window_definition)
                - np.asarray(table.pairwise_window_identity)
            ).max()
            worst = max(worst, gap)
            worst = max(worst, abs(
                table.pairwise_finite_definition - table.pairwise_finite_identity
            ))
            assert table.prob_total == pytest.approx(1.0, abs=1e-12)
    assert worst <= 1e-12
    assert time.monotonic() - t0 < 60.0


def test_criterion_02_pairwise_value_at_horizon_one(horizon_one):
    # P(pair coalesces | two particles at n=1) is exactly 2/3; both
    # estimators reproduce it within 3 standard errors at 1e5 replicates
    report, seconds = horizon_one
    assert exact_pairwise_prob(PARAMS, 1, 0) == pytest.approx(2.0 / 3.0, abs=1e-12)
    for name in ("pairwise_finite_ratio", "pairwise_finite_direct"):
        est = report.target(name).estimate
        assert abs(est.value - 2.0 / 3.0) <= 3.0 * est.stderr, name
    assert seconds < 60.0


def test_criterion_03_survival_asymptotics():
    # the geometric family is exactly harmonic; the general decay rate
    # n * q_n lands within 2 percent of 2 / sigma2 by n = 10000
    geo = critical_geometric_law()
    q = survival_probabilities(geo, 100)
    assert np.abs(q - 1.0 / (np.arange(101) + 1.0)).max() <= 1e-12
    for law, sigma2 in ((geo, 2.0), (PARAMS.offspring, PARAMS.sigma2)):
        qn = float(survival_probabilities(law, 10_000)[-1])
        target = 2.0 / sigma2
        assert abs(10_000 * qn - target) <= 0.02 * target


def test_criterion_04_population_law_at_512(pop512):
    report, seconds = pop512
    ks = report.target("population_ks")
    assert ks.estimate.value <= 0.05
    assert ks.verdict == "PASS"
    assert seconds < 300.0


def test_criterion_05_oldest_clan_tail_at_256(finite256):
    for u in (0.25, 0.5, 0.75):
        rec = finite256.target(f"oldest_clan_tail[u={u:g}]")
        assert rec.verdict == "PASS", f"u={u}: off by {abs(rec.estimate.value - rec.reference_value):.4f}"
    half = finite256.target("oldest_clan_tail[u=0.5]")
    assert half.reference_value == 0.5


def test_criterion_06_pairwise_window_at_256(finite256):
    for u in U_GRID:
        label = f"u={u:g}"
        assert finite256.target(f"pairwise_window_ratio[{label}]").verdict == "PASS"
        assert finite256.target(f"pairwise_window_direct[{label}]").verdict == "PASS"
        assert finite256.target(f"pairwise_estimator_agreement[{label}]").verdict == "PASS"


def test_criterion_07_whole_history_pairwise_approaches_limit(
    finite64, finite128, finite256
):
    golden = GOLDENS["pairwise_finite"]
    gaps = []
    for report in (finite64, finite128, finite256):
        est = report.target("pairwise_finite_ratio").estimate
        gaps.append((abs(est.value - golden["value"]), est.stderr))
    assert gaps[0][0] > gaps[1][0] > gaps[2][0], f"not shrinking: {gaps}"
    final_gap, final_stderr = gaps[2]
    assert final_gap <= 3.0 * math.hypot(final_stderr, golden["stderr"]) + 0.03


def test_criterion_08_total_coalescence_dies_off(sweep_report):
    assert sweep_report.notes["total_nonincreasing"] is True
    for n in (64, 128, 256, 512):
        assert sweep_report.target(f"total_coalescence_finite[n={n}]").verdict == "PASS"
    last = sweep_report.target("total_coalescence_finite[n=512]").estimate
    assert last.value <= 0.1


def test_criterion_09_limit_objects_internal_consistency():
    # (a) total mass of the clan measure follows the gamma population law
    rng = np.random.default_rng(90_001)
    sampler = ClanMassSampler(PARAMS.gamma, PARAMS.sigma2, 1e-6)
    _, linear, _ = sampler.sample_sums(rng, 100_000)
    assert ks_distance(linear, lambda t: population_limit_cdf(t, PARAMS)) <= 0.01

    # (b) early clans plus the measure, shrunk by 1 - u, rebuild the same law
    draws = composite_population_draws(0.5, PARAMS, 100_000, np.random.default_rng(90_002))
    assert ks_distance(draws, lambda t: population_limit_cdf(t, PARAMS)) <= 0.01

    # (c) at gamma = 1 the clan count plus one is the plain geometric count
    rng = np.random.default_rng(90_003)
    shifted = sample_negative_binomial(1.0, 0.5, rng, size=100_000) + 1
    geometric = rng.geometric(0.5, size=100_000)
    assert ks_two_sample(shifted, geometric) <= 0.01

    # (d) the collision ratio ignores the unit of mass to full precision
    rng = np.random.default_rng(90_004)
    for _ in range(100):
        masses = rng.exponential(1.0, int(rng.integers(1, 5)))
        atoms = rng.uniform(0.5, 2.0, int(rng.integers(0, 4)))
        base = mass_collision_ratio(
            LimitSample(masses.size, masses, PointMeasure(atoms, truncation_epsilon=0.1))
        )
        c = float(rng.uniform(0.01, 100.0))
        scaled = mass_collision_ratio(
            LimitSample(masses.size, c * masses,
                        PointMeasure(c * atoms, truncation_epsilon=c * 0.1))
        )
        assert abs(scaled - base) <= 1e-12


def test_criterion_10_single_ancestor_baseline(plain_report):
    for u in U_GRID:
        rec = plain_report.target(f"total_tail[u={u:g}]")
        assert abs(rec.estimate.value - (1.0 - u)) <= 0.03, f"u={u}"
        assert plain_report.target(f"pairwise_window[u={u:g}]").verdict == "PASS"
    assert plain_report.target("survival_rate").verdict == "PASS"


def test_criterion_11_reports_are_reproducible():
    kwargs = dict(limit_draws=2_000)
    a = run_finite_n(PARAMS, 16, (0.5,), 1_200, 123, **kwargs)
    b = run_finite_n(PARAMS, 16, (0.5,), 1_200, 123, **kwargs)
    assert a.to_json_bytes() == b.to_json_bytes()
    pooled = run_finite_n(PARAMS, 16, (0.5,), 1_200, 123, threads=2, **kwargs)
    assert pooled.to_json_bytes() == a.to_json_bytes()
