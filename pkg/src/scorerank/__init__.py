"""Rank school programs from applicants' score-report choices.

Higher-scoring applicants aim at more selective programs, so each program's
selection share as a function of the test score carries ordinal information
about how applicants collectively value it. This package bundles the rankers
that extract that order (monotonicity measures, a score-adjusted tournament,
and a covariate convex program), the portfolio-choice machinery that
justifies them, a synthetic market generator with known ground truth, and the
ingest/CLI plumbing to run everything on CSV score-report data.
"""

from .betafit import BetaModel, BinnedDistribution, FeatureMatrix, bin_scores, fit, rank_by_beta
from .choice import (
    BudgetRule,
    CollegeOffer,
    Portfolio,
    admit_prob,
    brute_force_portfolio,
    expected_utility,
    optimal_portfolio,
    undominated,
)
from .domain import (
    Dataset,
    Ranking,
    RankingEntry,
    RankingMethod,
    ScoreGrid,
    ScoreReport,
    Violation,
    validate_dataset,
)
from .ingest import (
    IngestConfig,
    IngestError,
    Major2,
    MajorGroup,
    Subgroup,
    apply_filters,
    best_attempt_filter,
    min_reports_filter,
    parse_csv,
    subgroup_filter,
    write_csv,
)
from .rankers import (
    Normalization,
    ScoreDistribution,
    TailDistribution,
    TournamentResult,
    m_measure,
    m_plus_count,
    pairwise_correctness_ratio,
    rank_by_m,
    rank_by_m_plus,
    score_distribution,
    tail_distribution,
    tournament,
)
from .simgen import (
    GroundTruth,
    Market,
    NoiseCdf,
    UtilityLaw,
    evenly_spaced_market,
    generate_dataset,
    load_market_config,
    portfolios_by_score,
    sample_utilities,
    simulate_student,
)
from .stats import FosdReport, FosdViolation, export_distributions, export_heatmap, fosd_check, spearman

__version__ = "0.1.0"
