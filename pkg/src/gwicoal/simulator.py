"""Forward simulation of a critical branching population with immigrant
founders, plus the genealogy extractors used by the coalescence studies.

A forest stores, per generation, each particle's parent index in the previous
generation (-1 for a fresh immigrant) together with the generation and ordinal
of its founding immigrant.  Within a generation, children of the previous
generation are listed first and that generation's immigrants are appended
after them.  Descendants of distinct immigrants never share an ancestor, so a
pair of lineages that reaches two different founders has no coalescence time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteLaw, ModelParams, check_critical_offspring
from .errors import DomainError, ResourceLimit
from .seeding import CLAN_STREAM, substream

DEFAULT_PARTICLE_CAP = 100_000_000
_CLAN_BATCH_CHUNK = 4096


@dataclass(frozen=True)
class CoalescenceOutcome:
    """Generation of a most recent common ancestor, or None when the chosen
    particles descend from distinct immigrants and no such ancestor exists."""

    generation: int | None

    @property
    def is_finite(self) -> bool:
        return self.generation is not None

    @classmethod
    def finite(cls, generation: int) -> "CoalescenceOutcome":
        return cls(int(generation))

    @classmethod
    def infinite(cls) -> "CoalescenceOutcome":
        return cls(None)


INFINITE = CoalescenceOutcome(None)


@dataclass
class GenealogyForest:
    """Per-generation parent pointers and founder tags for one replicate."""

    n: int
    parents: list  # parents[g]: int64 array, index into generation g-1 or -1
    founder_gen: list  # founder_gen[g]: generation the founder immigrated
    founder_ord: list  # founder_ord[g]: ordinal of the founder within its wave
    immigrants: np.ndarray  # immigrant counts I_0 .. I_n

    def size(self, g: int) -> int:
        return int(self.parents[g].size)

    @property
    def final_size(self) -> int:
        return self.size(self.n)

    @property
    def total_particles(self) -> int:
        return int(sum(p.size for p in self.parents))

    def check_invariants(self) -> None:
        """Raise AssertionError if the stored structure is inconsistent."""
        assert len(self.parents) == self.n + 1
        assert self.size(0) == int(self.immigrants[0])
        assert np.all(self.parents[0] == -1)
        for g in range(self.n + 1):
            imm = self.parents[g] == -1
            assert int(imm.sum()) == int(self.immigrants[g])
            # immigrants are appended after all children
            assert np.all(np.flatnonzero(imm) >= self.size(g) - int(self.immigrants[g]))
            assert np.array_equal(self.founder_gen[g][imm], np.full(imm.sum(), g))
            assert np.array_equal(self.founder_ord[g][imm], np.arange(imm.sum()))
            if g > 0:
                born = ~imm
                par = self.parents[g][born]
                assert np.all((par >= 0) & (par < self.size(g - 1)))
                assert np.array_equal(self.founder_gen[g][born], self.founder_gen[g - 1][par])
                assert np.array_equal(self.founder_ord[g][born], self.founder_ord[g - 1][par])

    def to_jsonable(self) -> dict:
        """Debug dump: generations as [parent_index, founder_gen, founder_ord]."""
        return {
            "n": self.n,
            "immigrants": self.immigrants.tolist(),
            "generations": [
                np.column_stack(
                    [self.parents[g], self.founder_gen[g], self.founder_ord[g]]
                ).tolist()
                for g in range(self.n + 1)
            ],
        }


_EMPTY = np.zeros(0, dtype=np.int64)


def _simulate(offspring: DiscreteLaw, immigrant_count, n: int, rng: np.random.Generator,
              particle_cap: int, immigration_stops_after: int | None = None) -> GenealogyForest:
    """Shared engine: immigrant_count(g, rng) gives the arrivals at generation g.

    The draw order per step is fixed (immigrants for the next generation, then
    one offspring count per current particle, left to right) so identical
    seeds replay identical forests.  When the caller promises that no
    immigrants arrive after some generation, a dead population ends the loop
    early; the remaining generations are empty either way, so the forest and
    the stream position are unchanged by the shortcut.
    """
    if n < 1:
        raise DomainError("the horizon n must be at least 1")
    i0 = int(immigrant_count(0, rng))
    parents = [np.full(i0, -1, dtype=np.int64)]
    founder_gen = [np.zeros(i0, dtype=np.int64)]
    founder_ord = [np.arange(i0, dtype=np.int64)]
    immigrants = np.zeros(n + 1, dtype=np.int64)
    immigrants[0] = i0
    budget = i0
    for g in range(n):
        if (
            immigration_stops_after is not None
            and g >= immigration_stops_after
            and parents[g].size == 0
        ):
            pad = n - g
            parents.extend([_EMPTY] * pad)
            founder_gen.extend([_EMPTY] * pad)
            founder_ord.extend([_EMPTY] * pad)
            break
        arriving = int(immigrant_count(g + 1, rng))
        z = parents[g].size
        counts = offspring.sample(rng, size=z) if z else np.zeros(0, dtype=np.int64)
        child_parent = np.repeat(np.arange(z, dtype=np.int64), counts)
        next_parents = np.concatenate(
            [child_parent, np.full(arriving, -1, dtype=np.int64)]
        )
        next_fgen = np.concatenate(
            [founder_gen[g][child_parent], np.full(arriving, g + 1, dtype=np.int64)]
        )
        next_ford = np.concatenate(
            [founder_ord[g][child_parent], np.arange(arriving, dtype=np.int64)]
        )
        budget += next_parents.size
        if budget > particle_cap:
            raise ResourceLimit(
                f"simulation reached {budget} particles, above the cap {particle_cap}"
            )
        parents.append(next_parents)
        founder_gen.append(next_fgen)
        founder_ord.append(next_ford)
        immigrants[g + 1] = arriving
    return GenealogyForest(n, parents, founder_gen, founder_ord, immigrants)


def simulate_forest_from_laws(offspring: DiscreteLaw, immigration: DiscreteLaw, n: int,
                              rng: np.random.Generator, *,
                              particle_cap: int = DEFAULT_PARTICLE_CAP) -> GenealogyForest:
    """Simulate without model validation; the building block for tests that
    exercise structurally degenerate laws."""
    return _simulate(offspring, lambda g, r: immigration.sample(r), n, rng, particle_cap)


def simulate_forest(params: ModelParams, n: int, rng: np.random.Generator, *,
                    particle_cap: int = DEFAULT_PARTICLE_CAP) -> GenealogyForest:
    """Simulate one replicate of the immigration model up to generation n."""
    return simulate_forest_from_laws(
        params.offspring, params.immigration, n, rng, particle_cap=particle_cap
    )


def simulate_plain_gw(offspring: DiscreteLaw, n: int, rng: np.random.Generator, *,
                      particle_cap: int = DEFAULT_PARTICLE_CAP) -> GenealogyForest:
    """Simulate a single-ancestor population (one founder at generation 0,
    no immigration afterwards) under a critical offspring law."""
    check_critical_offspring(offspring)
    return _simulate(
        offspring, lambda g, r: 1 if g == 0 else 0, n, rng, particle_cap,
        immigration_stops_after=0,
    )


def descendant_counts(forest: GenealogyForest) -> list:
    """counts[g][i] = number of generation-n descendants of particle (g, i).

    Computed by one backward sweep; bincount weights stay exact because every
    count is far below 2**53.
    """
    n = forest.n
    out = [None] * (n + 1)
    cur = np.ones(forest.size(n), dtype=np.int64)
    out[n] = cur
    for g in range(n - 1, -1, -1):
        par = forest.parents[g + 1]
        born = par >= 0
        cur = np.bincount(
            par[born], weights=out[g + 1][born], minlength=forest.size(g)
        ).astype(np.int64)
        out[g] = cur
    return out


@dataclass
class ClanDecomposition:
    """Generation-n survivors split by their generation-k ancestor or, for
    lineages founded after k, by their founding immigrant (j, l)."""

    k: int
    clan_sizes: np.ndarray  # one entry per generation-k particle
    immigrant_clan_sizes: dict  # (j, l) -> size, for k < j <= n

    def total(self) -> int:
        return int(self.clan_sizes.sum()) + sum(self.immigrant_clan_sizes.values())


def clan_decomposition(forest: GenealogyForest, k: int) -> ClanDecomposition:
    """Split generation n by ancestry at generation k.

    Args:
        forest: a simulated replicate.
        k: split generation, 0 <= k < n.

    Returns:
        ClanDecomposition whose sizes always add up to the final population.
    """
    if not 0 <= k < forest.n:
        raise DomainError(f"k must satisfy 0 <= k < n, got k={k}, n={forest.n}")
    desc = descendant_counts(forest)
    immigrant_sizes: dict = {}
    for j in range(k + 1, forest.n + 1):
        imm = forest.parents[j] == -1
        sizes = desc[j][imm]
        for l, s in enumerate(sizes):
            immigrant_sizes[(j, l)] = int(s)
    return ClanDecomposition(
        k=k, clan_sizes=desc[k].copy(), immigrant_clan_sizes=immigrant_sizes
    )


def _falling2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1.0)


def pairwise_ratio_sample(forest: GenealogyForest, k: int):
    """One replicate's same-clan pair fraction for the window [k, n).

    Returns (ratio, selected).  The ratio is the fraction of ordered pairs of
    final particles that either share a generation-k ancestor or descend from
    one immigrant arriving in generations k+1 .. n-1; it equals the
    conditional probability, given this forest, that a uniformly chosen pair
    coalesces in [k, n).  selected is False when the final population has
    fewer than two particles, in which case the ratio is reported as 0.
    """
    dec = clan_decomposition(forest, k)
    z = forest.final_size
    if z <= 1:
        return 0.0, False
    num = float(_falling2(dec.clan_sizes.astype(float)).sum())
    num += sum(
        s * (s - 1.0) for (j, _), s in dec.immigrant_clan_sizes.items() if j <= forest.n - 1
    )
    return num / (z * (z - 1.0)), True


def pairwise_ratio_profile(forest: GenealogyForest, ks) -> tuple:
    """Same-clan pair fractions for several window starts in one sweep.

    Args:
        forest: a simulated replicate.
        ks: iterable of split generations, each in [0, n).

    Returns:
        (ratios, selected) where ratios maps k to the same value
        pairwise_ratio_sample(forest, k) would produce.
    """
    ks = sorted(set(int(k) for k in ks))
    n = forest.n
    if ks and not (0 <= ks[0] and ks[-1] < n):
        raise DomainError("every k must satisfy 0 <= k < n")
    z = forest.final_size
    desc = descendant_counts(forest)
    own2 = {k: float(_falling2(desc[k].astype(float)).sum()) for k in ks}
    imm2 = np.zeros(n + 1)
    for j in range(n + 1):
        imm = forest.parents[j] == -1
        if imm.any():
            imm2[j] = float(_falling2(desc[j][imm].astype(float)).sum())
    if z <= 1:
        return {k: 0.0 for k in ks}, False
    # immigrants arriving at n contribute nothing: their clans are singletons
    suffix = np.concatenate([np.cumsum(imm2[::-1])[::-1][1:], [0.0]])
    den = z * (z - 1.0)
    ratios = {k: (own2[k] + suffix[k]) / den for k in ks}
    return ratios, True


def _unrank_pair(t: int, z: int):
    """Map t in [0, z(z-1)/2) to the t-th pair (i < j) in lexicographic order."""
    u = z * (z - 1) // 2 - 1 - t
    r = (math.isqrt(8 * u + 1) - 1) // 2
    while (r + 1) * (r + 2) // 2 <= u:
        r += 1
    while r * (r + 1) // 2 > u:
        r -= 1
    i = z - 2 - r
    j = z - 1 - (u - r * (r + 1) // 2)
    return i, j


def pairwise_mrca_walk(forest: GenealogyForest, i: int, j: int) -> CoalescenceOutcome:
    """Walk two final-generation lineages backwards until they meet or die out."""
    z = forest.final_size
    if not (0 <= i < z and 0 <= j < z) or i == j:
        raise DomainError("need two distinct final-generation particle indices")
    a, b = int(i), int(j)
    for g in range(forest.n, -1, -1):
        if a == b:
            return CoalescenceOutcome.finite(g)
        pa = int(forest.parents[g][a])
        pb = int(forest.parents[g][b])
        if pa < 0 or pb < 0:
            return INFINITE
        a, b = pa, pb
    return INFINITE


def sample_pairwise_coalescence(forest: GenealogyForest,
                                rng: np.random.Generator) -> CoalescenceOutcome:
    """Pick an unordered pair of final particles uniformly and return the
    generation of their most recent common ancestor.

    The pair index is drawn uniformly on {0, .., z(z-1)/2 - 1} and unranked
    combinatorially, so every pair is hit with equal probability without any
    rejection loop.
    """
    z = forest.final_size
    if z <= 1:
        raise DomainError("pair sampling needs at least two final particles")
    t = int(rng.integers(z * (z - 1) // 2))
    i, j = _unrank_pair(t, z)
    return pairwise_mrca_walk(forest, i, j)


def total_coalescence(forest: GenealogyForest) -> CoalescenceOutcome:
    """Most recent generation whose ancestor set of the whole final population
    is a single particle; Infinite when survivors stem from several founders.

    The backward mapping only ever merges lineages, so the ancestor-set size
    is nonincreasing as the walk proceeds.
    """
    z = forest.final_size
    if z == 0:
        raise DomainError("total coalescence is undefined for an empty population")
    cur = np.arange(z, dtype=np.int64)
    for g in range(forest.n, -1, -1):
        cur = np.unique(cur)
        if cur.size == 1:
            return CoalescenceOutcome.finite(g)
        par = forest.parents[g][cur]
        if np.any(par < 0):
            return INFINITE
        cur = par
    return INFINITE


def oldest_clan_birth(forest: GenealogyForest) -> CoalescenceOutcome:
    """Earliest immigration generation with a descendant alive at generation n."""
    if forest.final_size == 0:
        return INFINITE
    return CoalescenceOutcome.finite(int(forest.founder_gen[forest.n].min()))


@dataclass
class ClanBatchStats:
    """Per-replicate clan-level summaries from the vectorized population path."""

    final_size: np.ndarray  # Z_n per replicate
    surviving_clans: np.ndarray  # number of immigrants with live descendants
    oldest_founder: np.ndarray  # min founder generation among survivors, inf if none


def simulate_clan_statistics(params: ModelParams, n: int, replicates: int, seed: int,
                             *, particle_cap: int = DEFAULT_PARTICLE_CAP) -> ClanBatchStats:
    """Population-level fast path: evolve every immigrant clan as its own
    population, vectorized across replicates in fixed chunks.

    Genealogy inside a clan is never built, which is enough for the final
    population law, the count of surviving clans and the oldest surviving
    founder.  Chunks own substreams keyed by (seed, chunk index), so results
    do not depend on how work is scheduled.
    """
    if n < 1:
        raise DomainError("the horizon n must be at least 1")
    if replicates < 1:
        raise DomainError("need at least one replicate")
    support = np.arange(params.offspring.pmf.size, dtype=np.int64)
    final_size = np.zeros(replicates, dtype=np.int64)
    surviving = np.zeros(replicates, dtype=np.int64)
    oldest = np.full(replicates, np.inf)
    for start in range(0, replicates, _CLAN_BATCH_CHUNK):
        stop = min(start + _CLAN_BATCH_CHUNK, replicates)
        r = stop - start
        budget = 0  # the cap bounds per-replicate work, so scale by r below
        rng = substream(seed, CLAN_STREAM, start)
        pop = np.zeros(0, dtype=np.int64)
        rep = np.zeros(0, dtype=np.int64)
        fgen = np.zeros(0, dtype=np.int64)
        for g in range(n + 1):
            arrivals = params.immigration.sample(rng, size=r)
            new_rep = np.repeat(np.arange(r, dtype=np.int64), arrivals)
            pop = np.concatenate([pop, np.ones(new_rep.size, dtype=np.int64)])
            rep = np.concatenate([rep, new_rep])
            fgen = np.concatenate([fgen, np.full(new_rep.size, g, dtype=np.int64)])
            budget += int(pop.sum())
            if budget > particle_cap * r:
                raise ResourceLimit(
                    f"clan batch reached {budget} particles over {r} replicates, "
                    f"above the cap {particle_cap} per replicate"
                )
            if g < n and pop.size:
                table = rng.multinomial(pop, params.offspring.pmf)
                pop = table @ support
                alive = pop > 0
                pop, rep, fgen = pop[alive], rep[alive], fgen[alive]
        final_size[start:stop] = np.bincount(rep, weights=pop, minlength=r).astype(np.int64)
        alive = pop > 0
        surviving[start:stop] = np.bincount(rep[alive], minlength=r)
        np.minimum.at(oldest, start + rep[alive], fgen[alive])
    return ClanBatchStats(final_size, surviving, oldest)
