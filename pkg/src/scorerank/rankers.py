"""Non-parametric rankers over score-report data.

Three procedures, all driven by the same empirical object ``g_s(c)`` -- the
fraction of students with score ``s`` selecting program ``c``:

* the m measure ``m(c) = sum_{s < s'} (g_{s'}(c) - g_s(c)) (s' - s)``, whose
  descending order is the m-ranking (the recursive tail construction reduces
  to it because the tail's extra term does not depend on ``c``);
* the recursive m+ ranking, which repeatedly promotes the program whose tail
  ``Gbar_s(c) = g_s(c) + sum_{ranked} g_s(c_k)`` has the most score pairs
  trending the right way;
* a score-adjusted tournament: program ``a`` scores a point over ``b`` for
  every student selecting ``a`` but not ``b`` while some strictly
  lower-scoring student selected ``b`` but not ``a``; ranking by match wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .domain import Dataset, Ranking, RankingMethod


class Normalization(str, Enum):
    # candidate share: g columns are fractions of candidates (may sum past 1)
    # report share: g columns are fractions of selections (sum to 1)
    CANDIDATE_SHARE = "candidate"
    REPORT_SHARE = "report"


@dataclass(frozen=True)
class ScoreDistribution:
    """The ``g_s(c)`` matrix: programs by score levels, plus column weights."""

    g: np.ndarray
    program_ids: tuple[str, ...]
    scores: np.ndarray
    candidates_per_score: np.ndarray
    normalization: Normalization

    def __post_init__(self) -> None:
        if self.g.shape != (len(self.program_ids), len(self.scores)):
            raise ValueError("g must be programs x score levels")
        if self.candidates_per_score.shape != (len(self.scores),):
            raise ValueError("one candidate count per score level required")

    @property
    def valid_columns(self) -> np.ndarray:
        """Mask of score levels with at least one candidate."""
        return self.candidates_per_score > 0

    @property
    def empty_scores(self) -> tuple[int, ...]:
        """Score levels with zero candidates; their columns are all-zero."""
        return tuple(int(s) for s in self.scores[~self.valid_columns])

    def row(self, program_id: str) -> np.ndarray:
        return self.g[self.program_ids.index(program_id)]


@dataclass(frozen=True)
class TailDistribution:
    """``Gbar_s(c) = g_s(c) + sum of g over programs already ranked above``."""

    gbar: np.ndarray
    program_ids: tuple[str, ...]
    scores: np.ndarray
    ranked_above: tuple[str, ...]


def score_distribution(
    dataset: Dataset, normalization: Normalization = Normalization.CANDIDATE_SHARE
) -> ScoreDistribution:
    """Tabulate g from a dataset.

    The unit of observation is a (candidate, score) pair: a candidate
    selecting a program at a score counts once there no matter how many rows
    repeat the selection. Scores with no candidates get all-zero columns and
    are flagged via ``empty_scores``.
    """
    grid = dataset.score_grid
    programs = dataset.programs()
    m, t = len(programs), len(grid)

    counts = np.zeros((m, t), dtype=np.int64)
    candidates = np.zeros(t, dtype=np.int64)
    if dataset.reports:
        cand_codes: dict[str, int] = {}
        triples = np.empty((3, len(dataset.reports)), dtype=np.int64)
        for i, r in enumerate(dataset.reports):
            triples[0, i] = cand_codes.setdefault(r.candidate_id, len(cand_codes))
            triples[1, i] = grid.index_of(r.score)
            triples[2, i] = dataset.program_index[r.program_id]
        triples = np.unique(triples, axis=1)
        np.add.at(counts, (triples[2], triples[1]), 1)
        pairs = np.unique(triples[:2], axis=1)
        np.add.at(candidates, pairs[1], 1)

    with np.errstate(invalid="ignore", divide="ignore"):
        if normalization is Normalization.CANDIDATE_SHARE:
            g = counts / candidates[None, :]
        else:
            g = counts / counts.sum(axis=0, keepdims=True)
    g = np.nan_to_num(g, nan=0.0, posinf=0.0, neginf=0.0)
    return ScoreDistribution(
        g=g,
        program_ids=tuple(programs),
        scores=np.asarray(grid.levels(), dtype=np.int64),
        candidates_per_score=candidates,
        normalization=normalization,
    )


def _m_measure_rows(g: np.ndarray, scores: np.ndarray) -> np.ndarray:
    # sum over unordered pairs s < s' of (g' - g)(s' - s), per row; the double
    # sum collapses to n*sum(g s) - sum(g) sum(s)
    n = len(scores)
    s = scores.astype(float)
    return n * (g @ s) - g.sum(axis=1) * s.sum()


def m_measure(dist: ScoreDistribution, program_id: str) -> float:
    """m value for one program; positive when its g row trends up in score.

    Zero-candidate score columns are skipped rather than treated as g = 0,
    which would inject artificial trends at empty grid points.
    """
    valid = dist.valid_columns
    row = dist.row(program_id)[valid][None, :]
    return float(_m_measure_rows(row, dist.scores[valid])[0])


def _m_plus_rows(g: np.ndarray) -> np.ndarray:
    # count unordered pairs s < s' with g strictly increasing; columns must be
    # in ascending score order, which is all the sign of (s' - s) depends on
    increasing = g[:, None, :] > g[:, :, None]  # [row, i, j]: g_j > g_i
    upper = np.triu(np.ones((g.shape[1], g.shape[1]), dtype=bool), k=1)
    return (increasing & upper[None, :, :]).sum(axis=(1, 2))


def m_plus_count(dist: ScoreDistribution | TailDistribution, program_id: str) -> int:
    """Number of score pairs s < s' whose g (or tail) trend is strictly right."""
    if isinstance(dist, TailDistribution):
        g = dist.gbar
        valid = slice(None)  # tails are already restricted to populated columns
    else:
        g = dist.g
        valid = dist.valid_columns
    row = g[dist.program_ids.index(program_id)][valid][None, :]
    return int(_m_plus_rows(row)[0])


def tail_distribution(dist: ScoreDistribution, ranked_above: Sequence[str]) -> TailDistribution:
    """Tails given the programs already placed above, on valid columns only."""
    valid = dist.valid_columns
    above = [dist.program_ids.index(p) for p in ranked_above]
    base = dist.g[:, valid]
    gbar = base + base[above].sum(axis=0, keepdims=True)
    return TailDistribution(
        gbar=gbar,
        program_ids=dist.program_ids,
        scores=dist.scores[valid],
        ranked_above=tuple(ranked_above),
    )


def rank_by_m(dist: ScoreDistribution) -> Ranking:
    """Programs by m measure descending (ties recorded, broken by id)."""
    valid = dist.valid_columns
    values = _m_measure_rows(dist.g[:, valid], dist.scores[valid])
    return Ranking.from_scores(RankingMethod.M, zip(dist.program_ids, values))


def rank_by_m_plus(dist: ScoreDistribution) -> Ranking:
    """Recursive tail ranking by the m+ count.

    Iteratively promotes the program maximizing the m+ count of its tail
    (its g row plus everything ranked so far); argmax ties break by m value,
    then id. The recorded metric is the tail count at selection time, which
    unlike the sort-based rankers need not decrease along the order.
    """
    valid = dist.valid_columns
    g = dist.g[:, valid]
    m_values = _m_measure_rows(g, dist.scores[valid])

    remaining = list(range(len(dist.program_ids)))
    tail = np.zeros(g.shape[1])
    ordered: list[tuple[str, float]] = []
    while remaining:
        counts = _m_plus_rows(tail[None, :] + g[remaining])
        best_pos = min(
            range(len(remaining)),
            key=lambda k: (-counts[k], -m_values[remaining[k]], dist.program_ids[remaining[k]]),
        )
        j = remaining.pop(best_pos)
        ordered.append((dist.program_ids[j], float(counts[best_pos])))
        tail += g[j]
    return Ranking.from_ordered(RankingMethod.M_PLUS_RECURSIVE, ordered)


@dataclass(frozen=True)
class TournamentResult:
    """Pairwise points, match wins, and the resulting ranking."""

    points: np.ndarray
    wins: np.ndarray
    program_ids: tuple[str, ...]
    ranking: Ranking


def _tournament_units(
    dataset: Dataset, per_year: bool
) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Yield (scores, membership) per comparison pool.

    A unit is a candidate within a pool (a test year, or everything when
    ``per_year`` is off) with their best score there and the distinct
    programs they selected.
    """
    pools: dict[object, dict[str, tuple[int, set[int]]]] = {}
    for r in dataset.reports:
        pool_key = r.test_year if per_year else None
        units = pools.setdefault(pool_key, {})
        score, selected = units.get(r.candidate_id, (-(10**9), set()))
        selected.add(dataset.program_index[r.program_id])
        units[r.candidate_id] = (max(score, r.score), selected)

    m = dataset.n_programs()
    for _, units in sorted(pools.items(), key=lambda kv: (kv[0] is None, kv[0])):
        n = len(units)
        scores = np.empty(n, dtype=np.int64)
        membership = np.zeros((m, n), dtype=bool)
        for i, cand in enumerate(sorted(units)):
            score, selected = units[cand]
            scores[i] = score
            membership[list(selected), i] = True
        yield scores, membership


def tournament(dataset: Dataset, per_year: bool = True) -> TournamentResult:
    """Run every pairwise match-up and rank programs by wins.

    ``points[a][b]`` counts students selecting ``a`` but not ``b`` whose score
    strictly exceeds that of some student selecting ``b`` but not ``a``
    (candidates selecting both are dropped from that match-up; score ties
    contribute nothing). With ``per_year`` the count runs within each test
    year and sums. ``a`` beats ``b`` when ``points[a][b] > points[b][a]``;
    ranking ties in wins break by total points, then id, and are recorded.
    """
    m = dataset.n_programs()
    programs = tuple(dataset.programs())
    points = np.zeros((m, m), dtype=np.int64)

    for scores, membership in _tournament_units(dataset, per_year):
        for a in range(m):
            sel_a = membership[a]
            if not sel_a.any():
                continue
            for b in range(a + 1, m):
                sel_b = membership[b]
                a_only = sel_a & ~sel_b
                b_only = sel_b & ~sel_a
                if not (a_only.any() and b_only.any()):
                    continue
                scores_a = scores[a_only]
                scores_b = scores[b_only]
                points[a, b] += int((scores_a > scores_b.min()).sum())
                points[b, a] += int((scores_b > scores_a.min()).sum())

    beats = points > points.T
    np.fill_diagonal(beats, False)
    wins = beats.sum(axis=1).astype(np.int64)
    totals = points.sum(axis=1)
    ranking = Ranking.from_scores(
        RankingMethod.TOURNAMENT,
        zip(programs, wins.astype(float)),
        extra_keys={pid: (int(totals[j]),) for j, pid in enumerate(programs)},
    )
    return TournamentResult(points=points, wins=wins, program_ids=programs, ranking=ranking)


def pairwise_correctness_ratio(
    portfolios: Sequence[tuple[int, Iterable[str]]], truth
) -> tuple[int, int]:
    """Count correct vs incorrect inferred comparisons for one utility draw.

    For every student pair with strictly different scores, each program the
    higher scorer selected exclusively is inferred to rank above each program
    the lower scorer selected exclusively; the inference is correct when the
    ground-truth order agrees.
    """
    pos = truth.position_map()
    prepared = [(score, frozenset(programs)) for score, programs in portfolios]
    correct = 0
    incorrect = 0
    for i in range(len(prepared)):
        s_i, p_i = prepared[i]
        for j in range(i + 1, len(prepared)):
            s_j, p_j = prepared[j]
            if s_i == s_j:
                continue
            (hi, lo) = (p_i, p_j) if s_i > s_j else (p_j, p_i)
            for c_hi in hi - lo:
                for c_lo in lo - hi:
                    if pos[c_hi] < pos[c_lo]:
                        correct += 1
                    else:
                        incorrect += 1
    return correct, incorrect


def write_ranking_csv(ranking: Ranking, path) -> None:
    lines = ["rank,program_id,metric"]
    for e in ranking.entries:
        lines.append(f"{e.rank},{e.program_id},{e.metric_value!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ranking_json(ranking: Ranking, path) -> None:
    doc = {
        "method": ranking.method.value,
        "entries": [
            {"rank": e.rank, "program_id": e.program_id, "metric_value": e.metric_value}
            for e in ranking.entries
        ],
        "tie_groups": [list(group) for group in ranking.tie_groups],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_ranking_csv(path) -> Ranking:
    """Read ``rank,program_id,metric`` (extra columns ignored); method M."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [line for line in lines if line and not line.startswith("#")]
    header = rows[0].split(",")
    if header[:2] != ["rank", "program_id"] or len(header) < 3:
        raise ValueError(f"unrecognized ranking header in {path}: {rows[0]!r}")
    ordered = []
    for line in rows[1:]:
        cells = line.split(",")
        ordered.append((cells[1], float(cells[2])))
    return Ranking.from_ordered(RankingMethod.M, ordered)


def read_ranking_json(path) -> Ranking:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    ordered = [(e["program_id"], e["metric_value"]) for e in doc["entries"]]
    return Ranking.from_ordered(RankingMethod(doc["method"]), ordered)


def write_tail_tsv(tail: TailDistribution, path) -> None:
    """Tail matrix as TSV: one row per program, one column per score."""
    header = "program_id\t" + "\t".join(str(int(s)) for s in tail.scores)
    lines = [header]
    for j, pid in enumerate(tail.program_ids):
        lines.append(pid + "\t" + "\t".join(repr(float(x)) for x in tail.gbar[j]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
