"""Rank comparison, dominance checks, and plot-ready exporters.

The dominance machinery tests the model's core prediction at two levels: an
exact per-utility check on simulated portfolios (tail counts over the true
order must rise with score, with zero tolerance), and a sampled check on
datasets, where empirical tails get a noise allowance per cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .domain import Dataset, Ranking, RankingMethod
from .rankers import Normalization, score_distribution

DEFAULT_HEATMAP_MIN_REPORTS = 900


def _metric_map(ranking_like) -> dict[str, float]:
    if isinstance(ranking_like, Ranking):
        return ranking_like.metric_map()
    if hasattr(ranking_like, "order"):  # a ground-truth order, best first
        return {pid: -float(k) for k, pid in enumerate(ranking_like.order)}
    raise TypeError(f"cannot extract a ranking from {type(ranking_like).__name__}")


def spearman(a, b) -> float:
    """Spearman rank correlation on the programs the two rankings share.

    Accepts rankings or ground-truth orders. Restricted to the intersection;
    ties get average ranks. Requires at least two common programs and a
    non-constant metric on each side.
    """
    ma, mb = _metric_map(a), _metric_map(b)
    common = sorted(set(ma) & set(mb))
    if len(common) < 2:
        raise ValueError(f"need at least 2 common programs, got {len(common)}")
    xs = np.array([ma[c] for c in common])
    ys = np.array([mb[c] for c in common])
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ValueError("rank correlation is undefined for a constant ranking")
    return float(scipy_stats.spearmanr(xs, ys).statistic)


@dataclass(frozen=True)
class FosdViolation:
    program_id: str
    score_low: int
    score_high: int
    tail_low: float
    tail_high: float

    @property
    def gap(self) -> float:
        return self.tail_low - self.tail_high


@dataclass(frozen=True)
class FosdReport:
    """Outcome of a dominance check: empty iff tails rise with score everywhere."""

    violations: tuple[FosdViolation, ...]
    max_violation: float
    strict_increases: int
    pairs_checked: int

    def ok(self) -> bool:
        return not self.violations


def _positions(order, programs: Iterable[str]) -> dict[str, int]:
    if isinstance(order, Ranking):
        pos = {e.program_id: e.rank - 1 for e in order.entries}
    elif hasattr(order, "position_map"):
        pos = order.position_map()
    else:
        raise TypeError(f"cannot extract an order from {type(order).__name__}")
    missing = sorted(set(programs) - set(pos))
    if missing:
        raise ValueError(f"order does not cover programs: {missing}")
    return pos


def _tail_report(
    scores: Sequence[int],
    tails: np.ndarray,
    level_ids: Sequence[str],
    tolerances: np.ndarray,
) -> FosdReport:
    """Compare tail curves across every score pair at every order level."""
    violations: list[FosdViolation] = []
    max_violation = 0.0
    strict = 0
    pairs = 0
    n = len(scores)
    for i in range(n):
        for j in range(i + 1, n):
            pairs += len(level_ids)
            diff = tails[j] - tails[i]
            strict += int((diff > 0).sum())
            tol = max(tolerances[i], tolerances[j])
            for k in np.flatnonzero(diff < -tol):
                violations.append(
                    FosdViolation(
                        program_id=level_ids[k],
                        score_low=int(scores[i]),
                        score_high=int(scores[j]),
                        tail_low=float(tails[i, k]),
                        tail_high=float(tails[j, k]),
                    )
                )
                max_violation = max(max_violation, float(-diff[k]))
    return FosdReport(
        violations=tuple(violations),
        max_violation=max_violation,
        strict_increases=strict,
        pairs_checked=pairs,
    )


def fosd_check(data, order, tolerance: float | None = None) -> FosdReport:
    """Check that application tails rise with score under the supplied order.

    Two input forms:

    * a sequence of ``(score, programs)`` pairs for one fixed utility draw --
      the exact mode: tail counts (respecting any multiplicity in
      ``programs``) must be weakly increasing in score at every order level,
      zero tolerance unless overridden;
    * a dataset -- the sampled mode: empirical candidate-share tails with a
      per-cell allowance of ``2 / sqrt(candidates at the smaller score)``
      unless a fixed ``tolerance`` is given.
    """
    if isinstance(data, Dataset):
        return _fosd_check_dataset(data, order, tolerance)
    return _fosd_check_portfolios(data, order, 0.0 if tolerance is None else tolerance)


def _fosd_check_portfolios(
    portfolios: Sequence[tuple[int, Iterable[str]]], order, tolerance: float
) -> FosdReport:
    items = [(int(score), list(programs)) for score, programs in portfolios]
    pos = _positions(order, (p for _, programs in items for p in programs))
    level_ids = _order_ids(order)
    m = len(level_ids)
    items.sort(key=lambda sp: sp[0])
    scores = [s for s, _ in items]
    tails = np.zeros((len(items), m))
    for i, (_, programs) in enumerate(items):
        counts = np.bincount([pos[p] for p in programs], minlength=m)
        tails[i] = counts.cumsum()
    return _tail_report(scores, tails, level_ids, np.full(len(items), tolerance))


def _order_ids(order) -> list[str]:
    if isinstance(order, Ranking):
        return order.program_ids()
    return list(order.order)


def _fosd_check_dataset(dataset: Dataset, order, tolerance: float | None) -> FosdReport:
    dist = score_distribution(dataset, Normalization.CANDIDATE_SHARE)
    pos = _positions(order, dist.program_ids)
    level_ids = _order_ids(order)
    row_of = {pid: k for k, pid in enumerate(dist.program_ids)}
    # reorder g rows by the supplied order, then tails are cumulative sums
    ordered_rows = np.array(
        [dist.g[row_of[pid]] if pid in row_of else np.zeros(len(dist.scores)) for pid in level_ids]
    )
    valid = dist.valid_columns
    tails = ordered_rows[:, valid].cumsum(axis=0).T  # [score, level]
    scores = [int(s) for s in dist.scores[valid]]
    counts = dist.candidates_per_score[valid].astype(float)
    if tolerance is None:
        tolerances = 2.0 / np.sqrt(counts)
    else:
        tolerances = np.full(len(scores), tolerance)
    return _tail_report(scores, tails, level_ids, tolerances)


def export_distributions(
    dataset: Dataset,
    programs_subset: Sequence[str],
    path,
    normalization: Normalization = Normalization.CANDIDATE_SHARE,
) -> None:
    """Plot-ready TSV of score distributions, one row per grid score.

    Columns: the overall share of candidates at each score; per subset
    program, the score distribution among its selectors; per subset program,
    the selection share ``g_s(c)``. No rendering, just the numbers.
    """
    base = score_distribution(dataset, Normalization.CANDIDATE_SHARE)
    dist = base if normalization is Normalization.CANDIDATE_SHARE else score_distribution(
        dataset, normalization
    )
    counts = base.candidates_per_score.astype(float)
    total = counts.sum()
    overall = counts / total if total > 0 else counts

    unknown = [p for p in programs_subset if p not in base.program_ids]
    if unknown:
        raise ValueError(f"programs not present in the dataset: {unknown}")

    columns = ["score", "share_all"]
    series = [base.scores, overall]
    for pid in programs_subset:
        selectors = base.row(pid) * counts  # candidates selecting pid, per score
        denom = selectors.sum()
        columns.append(f"score_share[{pid}]")
        series.append(selectors / denom if denom > 0 else selectors)
    for pid in programs_subset:
        columns.append(f"select_share[{pid}]")
        series.append(dist.row(pid))

    lines = ["\t".join(columns)]
    for i in range(len(dist.scores)):
        cells = [str(int(dist.scores[i]))] + [repr(float(col[i])) for col in series[1:]]
        lines.append("\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_heatmap(
    dataset: Dataset, path, min_reports: int = DEFAULT_HEATMAP_MIN_REPORTS
) -> None:
    """Assortativity matrix: program-average-score buckets by candidate score.

    Rows are buckets of program average received score (as many buckets as
    grid levels), columns are candidate scores, cells are the fraction of
    candidates at that score selecting into the bucket. Programs with fewer
    than ``min_reports`` reports are excluded.
    """
    grid = dataset.score_grid
    t = len(grid)
    levels = grid.levels()

    report_counts: dict[str, int] = {}
    score_sums: dict[str, int] = {}
    for r in dataset.reports:
        report_counts[r.program_id] = report_counts.get(r.program_id, 0) + 1
        score_sums[r.program_id] = score_sums.get(r.program_id, 0) + r.score
    kept = {p for p, c in report_counts.items() if c >= min_reports}

    bucket_of: dict[str, int] = {}
    for p in kept:
        avg = score_sums[p] / report_counts[p]
        bucket_of[p] = min(int((avg - grid.score_min) // grid.score_step), t - 1)

    cells: dict[tuple[str, int], set[int]] = {}
    cand_scores: dict[tuple[str, int], bool] = {}
    for r in dataset.reports:
        unit = (r.candidate_id, r.score)
        cand_scores[unit] = True
        if r.program_id in kept:
            cells.setdefault(unit, set()).add(bucket_of[r.program_id])

    matrix = np.zeros((t, t))
    per_score = np.zeros(t)
    for (_, score), _flag in cand_scores.items():
        per_score[grid.index_of(score)] += 1
    for (_, score), buckets in cells.items():
        col = grid.index_of(score)
        for b in buckets:
            matrix[b, col] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.nan_to_num(matrix / per_score[None, :])

    lines = ["bucket_low_score\t" + "\t".join(str(s) for s in levels)]
    for b in range(t):
        lines.append(str(levels[b]) + "\t" + "\t".join(repr(float(x)) for x in matrix[b]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Bundled reference rankings (published top-35 lists for US full-time MBA
# programs, derived from nine years of exam score reports).

M_FIXTURE = "mba_m_measure_top35.csv"
TOURNAMENT_FIXTURE = "mba_tournament_wins_top35.csv"


def _fixture_rows(name: str) -> list[dict[str, str]]:
    with resources.files("scorerank.data").joinpath(name).open("r", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


def load_m_fixture() -> tuple[Ranking, Ranking]:
    """The published m-measure list as (m ranking, m+ values in the same order)."""
    rows = _fixture_rows(M_FIXTURE)
    m_ranked = Ranking.from_ordered(
        RankingMethod.M, [(r["program_id"], float(r["m_value"])) for r in rows]
    )
    mplus = Ranking.from_ordered(
        RankingMethod.M_PLUS_RECURSIVE,
        [(r["program_id"], float(r["m_plus_value"])) for r in rows],
    )
    _check_fixture(m_ranked, strictly=True)
    return m_ranked, mplus


def load_tournament_fixture() -> Ranking:
    """The published tournament-wins list, printed order preserved."""
    rows = _fixture_rows(TOURNAMENT_FIXTURE)
    ranking = Ranking.from_ordered(
        RankingMethod.TOURNAMENT, [(r["program_id"], float(r["wins"])) for r in rows]
    )
    _check_fixture(ranking, strictly=False)
    return ranking


def _check_fixture(ranking: Ranking, strictly: bool) -> None:
    values = [e.metric_value for e in ranking.entries]
    for a, b in zip(values, values[1:]):
        if (a <= b) if strictly else (a < b):
            raise ValueError(f"fixture metric not sorted descending near {a} -> {b}")
    ranks = [e.rank for e in ranking.entries]
    if ranks != list(range(1, len(ranks) + 1)):
        raise ValueError("fixture ranks must be 1..n")
