"""Replicate orchestration and reporting.

Runs finite-n experiments in fixed-size chunks whose replicates own
deterministic substreams, folds partial statistics in a canonical order, and
compares the estimates against exact references and Monte Carlo limit values.
Reports serialize to canonical JSON (and plot-ready CSV), so a rerun with the
same configuration and seed reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import __version__
from .distributions import DiscreteLaw, ModelParams, offspring_variance
from .errors import DomainError
from .exact import sole_survivor_probability, survival_probabilities
from .limits import (
    DEFAULT_EPSILON,
    LimitValue,
    limit_pairwise_finite,
    limit_pairwise_window,
    oldest_clan_tail_limit,
    plain_gw_pairwise_limit,
    population_limit_cdf,
)
from .seeding import FOREST_STREAM, LIMIT_STREAM, PLAIN_STREAM, substream
from .simulator import (
    DEFAULT_PARTICLE_CAP,
    pairwise_ratio_profile,
    sample_pairwise_coalescence,
    simulate_clan_statistics,
    simulate_forest,
    simulate_plain_gw,
)
from .stats import EstimateWithCI, RatioAccumulator

WORK_CHUNK = 512
MIN_REPLICATES = 100
DEFAULT_SLACK = 0.03
DEFAULT_KS_THRESHOLD = 0.05
K_RULE_NOTE = "k = round(u * n)"


def ks_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of the samples and `cdf`."""
    arr = np.sort(np.asarray(samples, dtype=float))
    if arr.size < 2:
        raise DomainError("the KS distance needs at least two samples")
    f = np.asarray(cdf(arr), dtype=float)
    grid = np.arange(1, arr.size + 1) / arr.size
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / arr.size))))


def ks_two_sample(a, b) -> float:
    """Sup distance between two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 2 or b.size < 2:
        raise DomainError("the KS distance needs at least two samples per side")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    difference: float
    allowance: float

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"


def compare(empirical: EstimateWithCI, reference, slack: float = 0.0) -> Verdict:
    """PASS when |estimate - reference| <= 3 * combined stderr + slack.

    The reference may be a float (exact value) or anything with value/stderr
    attributes (another estimate); stderrs combine in quadrature.
    """
    ref_value = getattr(reference, "value", reference)
    ref_stderr = getattr(reference, "stderr", 0.0)
    diff = abs(empirical.value - float(ref_value))
    allowance = 3.0 * math.hypot(empirical.stderr, float(ref_stderr)) + slack
    return Verdict(diff <= allowance, diff, allowance)


def compare_upper(empirical: EstimateWithCI, bound: float) -> Verdict:
    """PASS when the estimate does not exceed the bound by more than 3 stderr."""
    excess = empirical.value - float(bound)
    allowance = 3.0 * empirical.stderr
    return Verdict(excess <= allowance, excess, allowance)


def compare_threshold(value: float, threshold: float) -> Verdict:
    """PASS when a distance-type statistic stays at or below a fixed threshold."""
    return Verdict(value <= threshold, value, threshold)


@dataclass
class TargetRecord:
    """One reported quantity with its reference and verdict."""

    name: str
    estimate: EstimateWithCI
    reference_value: float | None = None
    reference_stderr: float = 0.0
    comparison: str = "none"  # two_sided | upper | threshold | none
    slack: float = 0.0
    verdict: str | None = None
    note: str = ""

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "value": _json_float(self.estimate.value),
            "stderr": _json_float(self.estimate.stderr),
            "n_effective": self.estimate.n_effective,
            "conditioning_rate": _json_float(self.estimate.conditioning_rate),
            "reference_value": _json_float(self.reference_value),
            "reference_stderr": _json_float(self.reference_stderr),
            "comparison": self.comparison,
            "slack": _json_float(self.slack),
            "verdict": self.verdict,
            "note": self.note,
        }


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class ExperimentReport:
    """Everything one run produced, in a deterministic serializable form."""

    kind: str
    seed: int
    params_hash: str
    config: dict
    targets: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    version: str = __version__

    def target(self, name: str) -> TargetRecord:
        for t in self.targets:
            if t.name == name:
                return t
        raise KeyError(name)

    def failed_targets(self) -> list:
        return [t for t in self.targets if t.verdict == "FAIL"]

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind,
            "version": self.version,
            "seed": self.seed,
            "params_hash": self.params_hash,
            "config": self.config,
            "targets": [t.to_jsonable() for t in self.targets],
            "tables": self.tables,
            "notes": self.notes,
        }

    def to_json_bytes(self) -> bytes:
        text = json.dumps(
            self.to_jsonable(), sort_keys=True, separators=(",", ":"), allow_nan=False
        )
        return (text + "\n").encode("ascii")


def model_hash(offspring_pmf, immigration_pmf) -> str:
    """Stable digest of the model laws, used to join artifacts safely."""
    payload = json.dumps(
        {
            "offspring": [float(x) for x in offspring_pmf],
            "immigration": [float(x) for x in immigration_pmf],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]


def params_config_echo(params: ModelParams) -> dict:
    return {
        "offspring": params.offspring.pmf.tolist(),
        "immigration": params.immigration.pmf.tolist(),
    }


# ---------------------------------------------------------------------------
# finite-n experiment


@dataclass
class _FinitePartial:
    ratio: dict
    direct: dict
    tau: dict
    total_single: RatioAccumulator
    z_mean: RatioAccumulator
    z_samples: np.ndarray

    @classmethod
    def empty(cls, ks, tau_ks) -> "_FinitePartial":
        return cls(
            ratio={k: RatioAccumulator() for k in ks},
            direct={k: RatioAccumulator() for k in ks},
            tau={k: RatioAccumulator() for k in tau_ks},
            total_single=RatioAccumulator(),
            z_mean=RatioAccumulator(),
            z_samples=np.zeros(0, dtype=np.int64),
        )

    def merge(self, other: "_FinitePartial") -> None:
        for k, acc in other.ratio.items():
            self.ratio[k].merge(acc)
        for k, acc in other.direct.items():
            self.direct[k].merge(acc)
        for k, acc in other.tau.items():
            self.tau[k].merge(acc)
        self.total_single.merge(other.total_single)
        self.z_mean.merge(other.z_mean)
        self.z_samples = np.concatenate([self.z_samples, other.z_samples])


def _finite_chunk(params: ModelParams, n: int, ks: tuple, tau_ks: tuple,
                  seed: int, particle_cap: int, bounds: tuple) -> _FinitePartial:
    start, stop = bounds
    part = _FinitePartial.empty(ks, tau_ks)
    zs = np.empty(stop - start, dtype=np.int64)
    for rep in range(start, stop):
        rng = substream(seed, FOREST_STREAM, rep)
        forest = simulate_forest(params, n, rng, particle_cap=particle_cap)
        z = forest.final_size
        zs[rep - start] = z
        part.z_mean.add(float(z))

        ratios, selected = pairwise_ratio_profile(forest, ks)
        for k in ks:
            part.ratio[k].add(ratios[k], selected)
        if selected:
            outcome = sample_pairwise_coalescence(forest, rng)
            for k in ks:
                hit = outcome.is_finite and outcome.generation >= k
                part.direct[k].add(1.0 if hit else 0.0, True)
        else:
            for k in ks:
                part.direct[k].add(0.0, False)

        if z > 0:
            fg = forest.founder_gen[n]
            fo = forest.founder_ord[n]
            single = bool(np.all(fg == fg[0]) and np.all(fo == fo[0]))
            part.total_single.add(1.0 if single else 0.0, True)
            tau = int(fg.min())
            for k in tau_ks:
                part.tau[k].add(1.0 if tau > k else 0.0, True)
        else:
            part.total_single.add(0.0, False)
            for k in tau_ks:
                part.tau[k].add(1.0, True)  # no survivors: founded after any k
    part.z_samples = zs
    return part


def _map_chunks(task, replicates: int, threads: int):
    bounds = [
        (start, min(start + WORK_CHUNK, replicates))
        for start in range(0, replicates, WORK_CHUNK)
    ]
    if threads <= 1:
        return [task(b) for b in bounds]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, bounds))


def merge_partials(partials) -> _FinitePartial:
    """Fold worker partials; folding happens in the given (canonical) order,
    so any scheduling of the work yields identical sums."""
    it = iter(partials)
    merged = next(it)
    for part in it:
        merged.merge(part)
    return merged


def run_finite_n(params: ModelParams, n: int, u_grid, replicates: int, seed: int, *,
                 epsilon: float = DEFAULT_EPSILON, slack: float = DEFAULT_SLACK,
                 limit_draws: int = 200_000, threads: int = 1,
                 particle_cap: int = DEFAULT_PARTICLE_CAP,
                 ks_threshold: float = DEFAULT_KS_THRESHOLD) -> ExperimentReport:
    """Simulate `replicates` forests at horizon n and report every coalescence
    statistic next to its exact or limiting reference.

    Pairwise quantities are estimated twice from the same replicates: by the
    per-forest pair fraction (clan identity) and by one sampled pair per
    forest (plain frequency).  The two must agree within Monte Carlo error,
    which is reported as its own verdict per window.

    Args:
        params: validated model.
        n: horizon, at least 1.
        u_grid: window fractions in (0, 1); each maps to k = round(u * n).
        replicates: number of forests, at least 100.
        seed: master seed; replicate r owns the substream (seed, 0, r).
        epsilon: truncation point for the limit-measure references.
        slack: systematic allowance added to limit comparisons.
        limit_draws: Monte Carlo draws per limit reference; 0 skips them.
        threads: worker processes; results are identical for any value.
        particle_cap: total-particle budget per replicate.
        ks_threshold: PASS level for the population-law KS distance.

    Returns:
        ExperimentReport with targets, a per-window table and the final
        population sample.
    """
    if replicates < MIN_REPLICATES:
        raise DomainError(f"need at least {MIN_REPLICATES} replicates")
    u_grid = [float(u) for u in u_grid]
    if any(not 0.0 < u < 1.0 for u in u_grid):
        raise DomainError("every u must lie strictly inside (0, 1)")
    k_of_u = {u: min(int(round(u * n)), n - 1) for u in u_grid}
    ks = tuple(sorted({0, *k_of_u.values()}))
    tau_ks = tuple(sorted(set(k_of_u.values())))

    task = partial(_finite_chunk, params, n, ks, tau_ks, seed, particle_cap)
    merged = merge_partials(_map_chunks(task, replicates, threads))

    report = ExperimentReport(
        kind="finite_n",
        seed=seed,
        params_hash=model_hash(params.offspring.pmf, params.immigration.pmf),
        config={
            **params_config_echo(params),
            "n": n,
            "replicates": replicates,
            "u_grid": u_grid,
            "epsilon": epsilon,
            "slack": slack,
            "limit_draws": limit_draws,
        },
        notes={"k_rule": K_RULE_NOTE},
    )

    limit_refs: dict = {}
    finite_ref: LimitValue | None = None
    if limit_draws > 0:
        for i, u in enumerate(u_grid):
            limit_refs[u] = limit_pairwise_window(
                u, params, limit_draws, substream(seed, LIMIT_STREAM, i), epsilon=epsilon
            )
        finite_ref = limit_pairwise_finite(
            params, limit_draws, substream(seed, LIMIT_STREAM, len(u_grid)),
            epsilon=epsilon,
        )
        report.notes["limit_bias_bound"] = _json_float(finite_ref.bias_bound)
        report.notes["limit_resamples"] = int(
            finite_ref.resamples + sum(r.resamples for r in limit_refs.values())
        )

    rows = []
    for u in u_grid:
        k = k_of_u[u]
        ratio_est = merged.ratio[k].estimate()
        direct_est = merged.direct[k].estimate()
        tau_est = merged.tau[k].estimate()
        tau_ref = oldest_clan_tail_limit(u, params.gamma)
        ref = limit_refs.get(u)
        label = f"u={u:g}"

        ratio_rec = TargetRecord(
            name=f"pairwise_window_ratio[{label}]", estimate=ratio_est,
            comparison="two_sided", slack=slack, note=f"k={k}",
        )
        direct_rec = TargetRecord(
            name=f"pairwise_window_direct[{label}]", estimate=direct_est,
            comparison="two_sided", slack=slack, note=f"k={k}",
        )
        if ref is not None:
            for rec in (ratio_rec, direct_rec):
                rec.reference_value = ref.value
                rec.reference_stderr = ref.stderr
                rec.verdict = compare(rec.estimate, ref.as_estimate(), slack).label
        agree = compare(ratio_est, direct_est, 0.0)
        agree_rec = TargetRecord(
            name=f"pairwise_estimator_agreement[{label}]",
            estimate=EstimateWithCI(
                ratio_est.value - direct_est.value,
                math.hypot(ratio_est.stderr, direct_est.stderr),
                ratio_est.n_effective,
                ratio_est.conditioning_rate,
            ),
            reference_value=0.0, comparison="two_sided", slack=0.0,
            verdict=agree.label, note=f"k={k}",
        )
        tau_rec = TargetRecord(
            name=f"oldest_clan_tail[{label}]", estimate=tau_est,
            reference_value=tau_ref, comparison="two_sided", slack=slack,
            verdict=compare(tau_est, tau_ref, slack).label, note=f"k={k}",
        )
        report.targets += [ratio_rec, direct_rec, agree_rec, tau_rec]
        rows.append({
            "u": u, "k": k,
            "ratio_estimate": ratio_est.value, "ratio_stderr": ratio_est.stderr,
            "direct_estimate": direct_est.value, "direct_stderr": direct_est.stderr,
            "limit_value": None if ref is None else ref.value,
            "limit_stderr": None if ref is None else ref.stderr,
            "ratio_verdict": ratio_rec.verdict,
            "direct_verdict": direct_rec.verdict,
            "agreement_verdict": agree_rec.verdict,
            "tau_estimate": tau_est.value, "tau_stderr": tau_est.stderr,
            "tau_limit": tau_ref, "tau_verdict": tau_rec.verdict,
        })

    # whole-history pairwise coalescence (window start 0)
    fin_ratio = merged.ratio[0].estimate()
    fin_direct = merged.direct[0].estimate()
    fin_ratio_rec = TargetRecord(
        name="pairwise_finite_ratio", estimate=fin_ratio,
        comparison="two_sided", slack=slack,
    )
    fin_direct_rec = TargetRecord(
        name="pairwise_finite_direct", estimate=fin_direct,
        comparison="two_sided", slack=slack,
    )
    if finite_ref is not None:
        for rec in (fin_ratio_rec, fin_direct_rec):
            rec.reference_value = finite_ref.value
            rec.reference_stderr = finite_ref.stderr
            rec.verdict = compare(rec.estimate, finite_ref.as_estimate(), slack).label
    fin_agree = compare(fin_ratio, fin_direct, 0.0)
    report.targets += [
        fin_ratio_rec,
        fin_direct_rec,
        TargetRecord(
            name="pairwise_finite_agreement",
            estimate=EstimateWithCI(
                fin_ratio.value - fin_direct.value,
                math.hypot(fin_ratio.stderr, fin_direct.stderr),
                fin_ratio.n_effective,
                fin_ratio.conditioning_rate,
            ),
            reference_value=0.0, comparison="two_sided", slack=0.0,
            verdict=fin_agree.label,
        ),
    ]

    total_est = merged.total_single.estimate()
    bound = sole_survivor_probability(params, n)
    report.targets.append(TargetRecord(
        name="total_coalescence_finite", estimate=total_est,
        reference_value=bound, comparison="upper", slack=0.0,
        verdict=compare_upper(total_est, bound).label,
        note="reference is the exact sole-surviving-clan probability",
    ))

    z_scaled = merged.z_samples / n
    ks_value = ks_distance(z_scaled, lambda t: population_limit_cdf(t, params))
    report.targets.append(TargetRecord(
        name="population_ks", estimate=EstimateWithCI(ks_value, 0.0, replicates),
        reference_value=ks_threshold, comparison="threshold",
        verdict=compare_threshold(ks_value, ks_threshold).label,
    ))
    z_est = merged.z_mean.estimate()
    z_ref = params.beta * (n + 1)
    report.targets.append(TargetRecord(
        name="population_mean", estimate=z_est, reference_value=z_ref,
        comparison="two_sided", slack=0.0, verdict=compare(z_est, z_ref).label,
    ))

    report.tables["by_u"] = rows
    report.tables["z_samples"] = merged.z_samples.tolist()
    report.notes["conditioning_rate_pairs"] = _json_float(fin_ratio.conditioning_rate)
    report.notes["conditioning_rate_nonempty"] = _json_float(
        total_est.conditioning_rate
    )
    return report


# ---------------------------------------------------------------------------
# population-only studies (no within-clan genealogy)


def run_population_study(params: ModelParams, n: int, u_grid, replicates: int,
                         seed: int, *, slack: float = DEFAULT_SLACK,
                         ks_threshold: float = DEFAULT_KS_THRESHOLD,
                         particle_cap: int = DEFAULT_PARTICLE_CAP) -> ExperimentReport:
    """Clan-level fast path: final population law, oldest surviving founder
    and the sole-survivor event, without building genealogies."""
    if replicates < MIN_REPLICATES:
        raise DomainError(f"need at least {MIN_REPLICATES} replicates")
    u_grid = [float(u) for u in u_grid]
    if any(not 0.0 < u < 1.0 for u in u_grid):
        raise DomainError("every u must lie strictly inside (0, 1)")
    stats = simulate_clan_statistics(
        params, n, replicates, seed, particle_cap=particle_cap
    )
    report = ExperimentReport(
        kind="population",
        seed=seed,
        params_hash=model_hash(params.offspring.pmf, params.immigration.pmf),
        config={
            **params_config_echo(params),
            "n": n, "replicates": replicates, "u_grid": u_grid, "slack": slack,
        },
        notes={"k_rule": K_RULE_NOTE},
    )
    rows = []
    for u in u_grid:
        k = min(int(round(u * n)), n - 1)
        acc = RatioAccumulator()
        acc.add_batch(
            (stats.oldest_founder > k).astype(float), np.ones(replicates, dtype=bool)
        )
        est = acc.estimate()
        ref = oldest_clan_tail_limit(u, params.gamma)
        rec = TargetRecord(
            name=f"oldest_clan_tail[u={u:g}]", estimate=est, reference_value=ref,
            comparison="two_sided", slack=slack,
            verdict=compare(est, ref, slack).label, note=f"k={k}",
        )
        report.targets.append(rec)
        rows.append({
            "u": u, "k": k, "tau_estimate": est.value, "tau_stderr": est.stderr,
            "tau_limit": ref, "tau_verdict": rec.verdict,
        })

    single = RatioAccumulator()
    single.add_batch(
        (stats.surviving_clans == 1).astype(float), stats.final_size > 0
    )
    total_est = single.estimate()
    bound = sole_survivor_probability(params, n)
    report.targets.append(TargetRecord(
        name="total_coalescence_finite", estimate=total_est, reference_value=bound,
        comparison="upper", slack=0.0,
        verdict=compare_upper(total_est, bound).label,
        note="reference is the exact sole-surviving-clan probability",
    ))

    ks_value = ks_distance(
        stats.final_size / n, lambda t: population_limit_cdf(t, params)
    )
    report.targets.append(TargetRecord(
        name="population_ks", estimate=EstimateWithCI(ks_value, 0.0, replicates),
        reference_value=ks_threshold, comparison="threshold",
        verdict=compare_threshold(ks_value, ks_threshold).label,
    ))
    z_acc = RatioAccumulator()
    z_acc.add_batch(stats.final_size.astype(float), np.ones(replicates, dtype=bool))
    z_est = z_acc.estimate()
    z_ref = params.beta * (n + 1)
    report.targets.append(TargetRecord(
        name="population_mean", estimate=z_est, reference_value=z_ref,
        comparison="two_sided", slack=0.0, verdict=compare(z_est, z_ref).label,
    ))
    report.tables["by_u"] = rows
    report.tables["z_samples"] = stats.final_size.tolist()
    return report


def run_sweep(params: ModelParams, n_grid, u: float, replicates: int, seed: int, *,
              slack: float = DEFAULT_SLACK,
              particle_cap: int = DEFAULT_PARTICLE_CAP) -> ExperimentReport:
    """Scaling study across horizons: the sole-survivor rate against its exact
    value, and the oldest-founder tail against its limit, per n."""
    n_grid = [int(n) for n in n_grid]
    if any(n < 2 for n in n_grid):
        raise DomainError("every n in the grid must be at least 2")
    if not 0.0 < u < 1.0:
        raise DomainError("u must lie strictly inside (0, 1)")
    report = ExperimentReport(
        kind="sweep",
        seed=seed,
        params_hash=model_hash(params.offspring.pmf, params.immigration.pmf),
        config={
            **params_config_echo(params),
            "n_grid": n_grid, "u": u, "replicates": replicates, "slack": slack,
        },
        notes={"k_rule": K_RULE_NOTE},
    )
    rows = []
    totals = []
    for i, n in enumerate(n_grid):
        stats = simulate_clan_statistics(
            params, n, replicates, seed + i, particle_cap=particle_cap
        )
        k = min(int(round(u * n)), n - 1)
        single = RatioAccumulator()
        single.add_batch(
            (stats.surviving_clans == 1).astype(float), stats.final_size > 0
        )
        total_est = single.estimate()
        bound = sole_survivor_probability(params, n)
        rec = TargetRecord(
            name=f"total_coalescence_finite[n={n}]", estimate=total_est,
            reference_value=bound, comparison="upper", slack=0.0,
            verdict=compare_upper(total_est, bound).label,
        )
        report.targets.append(rec)
        tau_acc = RatioAccumulator()
        tau_acc.add_batch(
            (stats.oldest_founder > k).astype(float),
            np.ones(stats.final_size.size, dtype=bool),
        )
        tau_est = tau_acc.estimate()
        tau_ref = oldest_clan_tail_limit(u, params.gamma)
        tau_rec = TargetRecord(
            name=f"oldest_clan_tail[n={n}]", estimate=tau_est, reference_value=tau_ref,
            comparison="two_sided", slack=slack,
            verdict=compare(tau_est, tau_ref, slack).label, note=f"k={k}",
        )
        report.targets.append(tau_rec)
        totals.append(total_est.value)
        rows.append({
            "n": n, "k": k,
            "total_estimate": total_est.value, "total_stderr": total_est.stderr,
            "total_bound": bound, "total_verdict": rec.verdict,
            "tau_estimate": tau_est.value, "tau_stderr": tau_est.stderr,
            "tau_limit": tau_ref, "tau_verdict": tau_rec.verdict,
        })
    report.tables["by_n"] = rows
    report.notes["total_nonincreasing"] = bool(
        all(a >= b for a, b in zip(totals, totals[1:]))
    )
    return report


# ---------------------------------------------------------------------------
# single-ancestor baseline


@dataclass
class _PlainPartial:
    survival: RatioAccumulator
    tail: dict
    window: dict

    @classmethod
    def empty(cls, u_grid) -> "_PlainPartial":
        return cls(
            survival=RatioAccumulator(),
            tail={u: RatioAccumulator() for u in u_grid},
            window={u: RatioAccumulator() for u in u_grid},
        )

    def merge(self, other: "_PlainPartial") -> None:
        self.survival.merge(other.survival)
        for u, acc in other.tail.items():
            self.tail[u].merge(acc)
        for u, acc in other.window.items():
            self.window[u].merge(acc)


def _plain_chunk(offspring: DiscreteLaw, n: int, u_grid: tuple, seed: int,
                 particle_cap: int, bounds: tuple) -> _PlainPartial:
    from .simulator import total_coalescence  # local to keep worker import light

    start, stop = bounds
    part = _PlainPartial.empty(u_grid)
    for rep in range(start, stop):
        rng = substream(seed, PLAIN_STREAM, rep)
        forest = simulate_plain_gw(offspring, n, rng, particle_cap=particle_cap)
        y = forest.final_size
        part.survival.add(1.0 if y > 0 else 0.0, True)
        if y > 0:
            gen = total_coalescence(forest).generation
            for u in u_grid:
                part.tail[u].add(1.0 if gen > u * n else 0.0, True)
        else:
            for u in u_grid:
                part.tail[u].add(0.0, False)
        if y > 1:
            outcome = sample_pairwise_coalescence(forest, rng)
            for u in u_grid:
                k = min(int(round(u * n)), n - 1)
                hit = outcome.is_finite and outcome.generation >= k
                part.window[u].add(1.0 if hit else 0.0, True)
        else:
            for u in u_grid:
                part.window[u].add(0.0, False)
    return part


def run_plain_gw_study(offspring: DiscreteLaw, n: int, u_grid, replicates: int,
                       seed: int, *, slack: float = DEFAULT_SLACK,
                       limit_draws: int = 200_000, threads: int = 1,
                       particle_cap: int = DEFAULT_PARTICLE_CAP) -> ExperimentReport:
    """Baseline without immigration: one founder, statistics conditioned on
    survival by rejection.  The all-particle coalescence tail is checked
    against 1 - u and the pair tail against its own Monte Carlo limit."""
    if replicates < MIN_REPLICATES:
        raise DomainError(f"need at least {MIN_REPLICATES} replicates")
    u_grid = tuple(float(u) for u in u_grid)
    if any(not 0.0 < u < 1.0 for u in u_grid):
        raise DomainError("every u must lie strictly inside (0, 1)")
    sigma2 = offspring_variance(offspring)

    task = partial(_plain_chunk, offspring, n, u_grid, seed, particle_cap)
    merged_parts = _map_chunks(task, replicates, threads)
    merged = merged_parts[0]
    for part in merged_parts[1:]:
        merged.merge(part)

    report = ExperimentReport(
        kind="plain_gw",
        seed=seed,
        params_hash=model_hash(offspring.pmf, [1.0]),
        config={
            "offspring": offspring.pmf.tolist(),
            "n": n, "replicates": replicates, "u_grid": list(u_grid),
            "slack": slack, "limit_draws": limit_draws,
        },
        notes={"k_rule": K_RULE_NOTE, "sigma2": sigma2},
    )

    surv_est = merged.survival.estimate()
    surv_ref = float(survival_probabilities(offspring, n)[n])
    report.targets.append(TargetRecord(
        name="survival_rate", estimate=surv_est, reference_value=surv_ref,
        comparison="two_sided", slack=0.0,
        verdict=compare(surv_est, surv_ref).label,
    ))

    rows = []
    for i, u in enumerate(u_grid):
        tail_est = merged.tail[u].estimate()
        tail_rec = TargetRecord(
            name=f"total_tail[u={u:g}]", estimate=tail_est, reference_value=1.0 - u,
            comparison="two_sided", slack=slack,
            verdict=compare(tail_est, 1.0 - u, slack).label,
        )
        window_est = merged.window[u].estimate()
        window_rec = TargetRecord(
            name=f"pairwise_window[u={u:g}]", estimate=window_est,
            comparison="two_sided", slack=slack,
        )
        ref = None
        if limit_draws > 0:
            ref = plain_gw_pairwise_limit(
                u, sigma2, limit_draws, substream(seed, LIMIT_STREAM, i)
            )
            window_rec.reference_value = ref.value
            window_rec.reference_stderr = ref.stderr
            window_rec.verdict = compare(window_est, ref.as_estimate(), slack).label
        report.targets += [tail_rec, window_rec]
        rows.append({
            "u": u,
            "tail_estimate": tail_est.value, "tail_stderr": tail_est.stderr,
            "tail_limit": 1.0 - u, "tail_verdict": tail_rec.verdict,
            "window_estimate": window_est.value, "window_stderr": window_est.stderr,
            "window_limit": None if ref is None else ref.value,
            "window_stderr_limit": None if ref is None else ref.stderr,
            "window_verdict": window_rec.verdict,
        })
    report.tables["by_u"] = rows
    report.notes["conditioning_rate_alive"] = _json_float(
        merged.tail[u_grid[0]].estimate().conditioning_rate if u_grid else None
    )
    return report


# ---------------------------------------------------------------------------
# delimited output


def write_report_json(report: ExperimentReport, path) -> None:
    with open(path, "wb") as fh:
        fh.write(report.to_json_bytes())


def write_rows_csv(path, rows, fieldnames=None) -> None:
    """Plot-ready CSV; floats keep their full repr so reruns stay identical."""
    if not rows:
        return
    if fieldnames is None:
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value
