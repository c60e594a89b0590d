"""Closed-form and exhaustively enumerated references.

Everything here is deterministic: survival probabilities by generating-function
iteration, the product formula for the probability that exactly one immigrant
clan survives, and brute-force enumeration of every history of a tiny model.
The enumeration computes each pairwise quantity twice, once straight from the
most-recent-common-ancestor definition and once through the clan-size
identity, so the two routes can be checked against each other digit for digit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteLaw, ModelParams, check_critical_offspring
from .errors import DomainError, ExplosionError, GwicoalError
from .simulator import (
    GenealogyForest,
    clan_decomposition,
    oldest_clan_birth,
    pairwise_ratio_sample,
    total_coalescence,
)

DEFAULT_HISTORY_CAP = 2_000_000
IDENTITY_TOLERANCE = 1e-12


def survival_probabilities(offspring: DiscreteLaw, n: int) -> np.ndarray:
    """q[j] = P(a single-ancestor population is alive at generation j), j <= n.

    Computed by iterating q[j+1] = 1 - F(1 - q[j]) with the offspring
    generating function F, starting from q[0] = 1.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    check_critical_offspring(offspring)
    q = np.empty(n + 1)
    q[0] = 1.0
    for j in range(n):
        q[j + 1] = 1.0 - offspring.pgf(1.0 - q[j])
    return q


def extinction_probabilities(offspring: DiscreteLaw, n: int) -> np.ndarray:
    """a[j] = 1 - q[j], the chance of being extinct by generation j."""
    return 1.0 - survival_probabilities(offspring, n)


def sole_survivor_curve(params: ModelParams, n: int) -> np.ndarray:
    """P(exactly one immigrant ever has live descendants at the horizon), for
    every horizon m = 0 .. n.

    The value at horizon m is prod_{k<=m} B(a_k) * sum_{j<=m} B'(a_j) q_j / B(a_j)
    with B the immigration generating function.  Zero factors (possible when
    the immigration law cannot produce zero arrivals) are tracked explicitly
    instead of divided out, so the result stays exact in that corner too.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    q = survival_probabilities(params.offspring, n)
    a = 1.0 - q
    b = params.immigration.pgf(a)
    bp = params.immigration.pgf_prime(a)
    out = np.empty(n + 1)
    nonzero_prod = 1.0
    zero_terms: list = []  # j with b[j] == 0; at most the whole prefix
    ratio_sum = 0.0
    for m in range(n + 1):
        if b[m] == 0.0:
            zero_terms.append(m)
        else:
            nonzero_prod *= b[m]
            ratio_sum += bp[m] * q[m] / b[m]
        if not zero_terms:
            out[m] = nonzero_prod * ratio_sum
        elif len(zero_terms) == 1:
            # only the j-term at the zero factor survives the product
            z = zero_terms[0]
            out[m] = nonzero_prod * bp[z] * q[z]
        else:
            out[m] = 0.0
    return out


def empty_population_probability(params: ModelParams, n: int) -> float:
    """P(no particles at generation n), exactly: every immigrant clan,
    including the one arriving at n itself, must have died out."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    a = extinction_probabilities(params.offspring, n)
    return float(np.prod(params.immigration.pgf(a)))


def sole_survivor_probability(params: ModelParams, n: int) -> float:
    """P(exactly one immigrant clan survives to generation n), exactly.

    This event coincides with a finite all-particle coalescence time on a
    nonempty population, so it also serves as an upper reference for the
    simulated frequency of that event.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    return float(sole_survivor_curve(params, n)[n])


def lineage_matrix(forest: GenealogyForest) -> np.ndarray:
    """rows: final particles; columns: the lineage's index at each generation,
    or -1 before the founding immigrant arrived."""
    z = forest.final_size
    n = forest.n
    out = np.full((z, n + 1), -1, dtype=np.int64)
    out[:, n] = np.arange(z)
    for g in range(n, 0, -1):
        cur = out[:, g]
        born = cur >= 0
        par = np.full(z, -1, dtype=np.int64)
        par[born] = forest.parents[g][cur[born]]
        out[:, g - 1] = par
    return out


def pairwise_mrca_counts(forest: GenealogyForest):
    """Count unordered final pairs by the generation of their most recent
    common ancestor, straight from the definition.

    Returns:
        (counts, infinite_pairs): counts[g] pairs coalesce at generation g;
        infinite_pairs descend from distinct immigrants.
    """
    z = forest.final_size
    n = forest.n
    counts = np.zeros(n + 1, dtype=np.int64)
    infinite = 0
    if z < 2:
        return counts, 0
    lin = lineage_matrix(forest)
    for i in range(z - 1):
        eq = (lin[i + 1 :] == lin[i]) & (lin[i] >= 0)
        any_eq = eq.any(axis=1)
        infinite += int((~any_eq).sum())
        if any_eq.any():
            last = n - np.argmax(eq[any_eq][:, ::-1], axis=1)
            counts += np.bincount(last, minlength=n + 1)
    return counts, infinite


@dataclass
class ExactTable:
    """Exact distributions of every studied statistic for one tiny model."""

    n: int
    history_count: int
    prob_total: float
    z_law: dict
    p_final_gt0: float
    p_final_gt1: float
    # conditional on a final population of at least two particles
    pairwise_window_definition: np.ndarray  # index k: P(k <= pair time < n | Z_n > 1)
    pairwise_window_identity: np.ndarray  # same number through clan sizes
    pairwise_finite_definition: float
    pairwise_finite_identity: float
    # conditional on a nonempty final population
    total_time_law: dict  # generation -> P(total time = g | Z_n > 0)
    total_finite: float
    # unconditional
    single_clan_prob: float
    tau_tail: np.ndarray  # index k: P(oldest surviving founder arrived after k)

    def to_jsonable(self) -> dict:
        return {
            "n": self.n,
            "history_count": self.history_count,
            "prob_total": self.prob_total,
            "z_law": {str(z): p for z, p in sorted(self.z_law.items())},
            "p_final_gt0": self.p_final_gt0,
            "p_final_gt1": self.p_final_gt1,
            "pairwise_window_definition": list(self.pairwise_window_definition),
            "pairwise_window_identity": list(self.pairwise_window_identity),
            "pairwise_finite_definition": self.pairwise_finite_definition,
            "pairwise_finite_identity": self.pairwise_finite_identity,
            "total_time_law": {str(g): p for g, p in sorted(self.total_time_law.items())},
            "total_finite": self.total_finite,
            "single_clan_prob": self.single_clan_prob,
            "tau_tail": list(self.tau_tail),
        }


def enumerate_tiny(params: ModelParams, n: int, *,
                   history_cap: int = DEFAULT_HISTORY_CAP) -> ExactTable:
    """Walk every history of the model up to generation n and tabulate exact
    probabilities for all studied statistics.

    Branch order within a step is fixed: the next generation's immigration
    draw first, then one offspring draw per current particle, left to right.
    Probabilities are accumulated as plain double products, which stay exact
    for dyadic laws.

    Raises:
        ExplosionError: more than history_cap histories would be visited.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    off_outcomes = [(v, p) for v, p in enumerate(params.offspring.pmf) if p > 0.0]
    imm_outcomes = [(v, p) for v, p in enumerate(params.immigration.pmf) if p > 0.0]

    acc = _ExactAccumulator(n)
    state_parents: list = []
    state_fgen: list = []
    state_ford: list = []
    state_imm: list = []

    def leaf(prob: float) -> None:
        acc.history_count += 1
        if acc.history_count > history_cap:
            raise ExplosionError(
                f"enumeration passed {history_cap} histories; raise the cap to continue"
            )
        forest = GenealogyForest(
            n,
            [np.array(p, dtype=np.int64) for p in state_parents],
            [np.array(f, dtype=np.int64) for f in state_fgen],
            [np.array(o, dtype=np.int64) for o in state_ford],
            np.array(state_imm, dtype=np.int64),
        )
        acc.visit(forest, prob)

    def advance(g: int, prob: float) -> None:
        if g == n:
            leaf(prob)
            return
        z = len(state_parents[g])
        for arriving, b in imm_outcomes:
            for combo in itertools.product(off_outcomes, repeat=z):
                p_step = b * math.prod(p for _, p in combo)
                parents = [
                    parent
                    for parent, (cnt, _) in enumerate(combo)
                    for _ in range(cnt)
                ]
                fgen = [state_fgen[g][parent] for parent in parents]
                ford = [state_ford[g][parent] for parent in parents]
                parents += [-1] * arriving
                fgen += [g + 1] * arriving
                ford += list(range(arriving))
                state_parents.append(parents)
                state_fgen.append(fgen)
                state_ford.append(ford)
                state_imm.append(arriving)
                advance(g + 1, prob * p_step)
                state_parents.pop()
                state_fgen.pop()
                state_ford.pop()
                state_imm.pop()

    for i0, b0 in imm_outcomes:
        state_parents.append([-1] * i0)
        state_fgen.append([0] * i0)
        state_ford.append(list(range(i0)))
        state_imm.append(i0)
        advance(0, b0)
        state_parents.pop()
        state_fgen.pop()
        state_ford.pop()
        state_imm.pop()

    return acc.finish()


class _ExactAccumulator:
    def __init__(self, n: int) -> None:
        self.n = n
        self.history_count = 0
        self.prob_total = 0.0
        self.z_law: dict = {}
        self.p_gt0 = 0.0
        self.p_gt1 = 0.0
        self.window_def = np.zeros(n)
        self.window_id = np.zeros(n)
        self.total_law: dict = {}
        self.total_finite = 0.0
        self.single_clan = 0.0
        self.tau_gt = np.zeros(n + 1)

    def visit(self, forest: GenealogyForest, prob: float) -> None:
        n = self.n
        z = forest.final_size
        self.prob_total += prob
        self.z_law[z] = self.z_law.get(z, 0.0) + prob
        tau = oldest_clan_birth(forest)
        for k in range(n + 1):
            if not tau.is_finite or tau.generation > k:
                self.tau_gt[k] += prob
        if z == 0:
            return
        self.p_gt0 += prob
        founders = set(
            zip(forest.founder_gen[n].tolist(), forest.founder_ord[n].tolist())
        )
        if len(founders) == 1:
            self.single_clan += prob
        total = total_coalescence(forest)
        if total.is_finite:
            g = total.generation
            self.total_law[g] = self.total_law.get(g, 0.0) + prob
            self.total_finite += prob
        if z < 2:
            return
        self.p_gt1 += prob
        counts, _ = pairwise_mrca_counts(forest)
        pairs = z * (z - 1) // 2
        finite_ge = np.cumsum(counts[::-1])[::-1]  # pairs with time >= k
        for k in range(n):
            self.window_def[k] += prob * finite_ge[k] / pairs
            ratio, _ = pairwise_ratio_sample(forest, k)
            self.window_id[k] += prob * ratio

    def finish(self) -> ExactTable:
        if self.p_gt1 <= 0.0:
            raise GwicoalError(
                "the model never reaches two final particles; nothing to tabulate"
            )
        return ExactTable(
            n=self.n,
            history_count=self.history_count,
            prob_total=self.prob_total,
            z_law=self.z_law,
            p_final_gt0=self.p_gt0,
            p_final_gt1=self.p_gt1,
            pairwise_window_definition=self.window_def / self.p_gt1,
            pairwise_window_identity=self.window_id / self.p_gt1,
            pairwise_finite_definition=float(self.window_def[0] / self.p_gt1),
            pairwise_finite_identity=float(self.window_id[0] / self.p_gt1),
            total_time_law={g: p / self.p_gt0 for g, p in self.total_law.items()},
            total_finite=self.total_finite / self.p_gt0,
            single_clan_prob=self.single_clan,
            tau_tail=self.tau_gt,
        )


def exact_pairwise_prob(params: ModelParams, n: int, k: int, *,
                        history_cap: int = DEFAULT_HISTORY_CAP) -> float:
    """Exact P(pair coalescence time in [k, n) | at least two final particles).

    Computed through the clan-size identity and cross-checked against the
    definitional count from the same enumeration; a disagreement beyond
    1e-12 raises, since both routes compute the same number.
    """
    if not 0 <= k < n:
        raise DomainError(f"k must satisfy 0 <= k < n, got k={k}, n={n}")
    table = enumerate_tiny(params, n, history_cap=history_cap)
    ident = float(table.pairwise_window_identity[k])
    defn = float(table.pairwise_window_definition[k])
    if abs(ident - defn) > IDENTITY_TOLERANCE:
        raise GwicoalError(
            f"clan identity ({ident!r}) and definition ({defn!r}) disagree at k={k}"
        )
    return ident
