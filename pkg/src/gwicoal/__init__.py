"""Coalescence statistics for critical branching populations with immigration.

Simulate genealogies forward, read coalescence times off them, and check the
finite-n statistics against exact formulas and their limiting laws.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .distributions import (
    ClanMassSampler,
    DiscreteLaw,
    ModelParams,
    PointMeasure,
    critical_geometric_law,
    negative_binomial_pmf,
    sample_negative_binomial,
    validate_model,
)
from .errors import (
    ConfigError,
    DegenerateOffspring,
    DomainError,
    EmptySample,
    ExplosionError,
    GwicoalError,
    NoImmigration,
    NotAProbability,
    NotCritical,
    ResourceLimit,
    SchemaError,
)
from .exact import (
    ExactTable,
    enumerate_tiny,
    exact_pairwise_prob,
    sole_survivor_curve,
    sole_survivor_probability,
    survival_probabilities,
)
from .harness import (
    ExperimentReport,
    TargetRecord,
    Verdict,
    compare,
    ks_distance,
    ks_two_sample,
    run_finite_n,
    run_plain_gw_study,
    run_population_study,
    run_sweep,
)
from .limits import (
    LimitSample,
    LimitValue,
    composite_population_draws,
    limit_pairwise_finite,
    limit_pairwise_window,
    mass_collision_ratio,
    oldest_clan_tail_limit,
    plain_gw_pairwise_limit,
    population_limit_cdf,
    population_limit_pdf,
    sample_limit_draw,
)
from .simulator import (
    CoalescenceOutcome,
    GenealogyForest,
    clan_decomposition,
    oldest_clan_birth,
    pairwise_ratio_profile,
    pairwise_ratio_sample,
    sample_pairwise_coalescence,
    simulate_clan_statistics,
    simulate_forest,
    simulate_plain_gw,
    total_coalescence,
)
from .stats import EstimateWithCI, RatioAccumulator

__all__ = [
    "__version__",
    "ClanMassSampler",
    "CoalescenceOutcome",
    "ConfigError",
    "DegenerateOffspring",
    "DiscreteLaw",
    "DomainError",
    "EmptySample",
    "EstimateWithCI",
    "ExactTable",
    "ExperimentConfig",
    "ExperimentReport",
    "ExplosionError",
    "GenealogyForest",
    "GwicoalError",
    "LimitSample",
    "LimitValue",
    "ModelParams",
    "PointMeasure",
    "NoImmigration",
    "NotAProbability",
    "NotCritical",
    "RatioAccumulator",
    "ResourceLimit",
    "SchemaError",
    "TargetRecord",
    "Verdict",
    "clan_decomposition",
    "compare",
    "composite_population_draws",
    "critical_geometric_law",
    "enumerate_tiny",
    "exact_pairwise_prob",
    "ks_distance",
    "ks_two_sample",
    "limit_pairwise_finite",
    "limit_pairwise_window",
    "load_config",
    "mass_collision_ratio",
    "negative_binomial_pmf",
    "oldest_clan_birth",
    "oldest_clan_tail_limit",
    "pairwise_ratio_profile",
    "pairwise_ratio_sample",
    "plain_gw_pairwise_limit",
    "population_limit_cdf",
    "population_limit_pdf",
    "run_finite_n",
    "run_plain_gw_study",
    "run_population_study",
    "run_sweep",
    "sample_limit_draw",
    "sample_negative_binomial",
    "sample_pairwise_coalescence",
    "simulate_clan_statistics",
    "simulate_forest",
    "simulate_plain_gw",
    "sole_survivor_curve",
    "sole_survivor_probability",
    "survival_probabilities",
    "total_coalescence",
    "validate_model",
]
