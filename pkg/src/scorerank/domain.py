"""Shared vocabulary types: score grids, score reports, datasets, rankings.

Everything here is immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

DEFAULT_SCORE_MIN = 200
DEFAULT_SCORE_MAX = 800
DEFAULT_SCORE_STEP = 10
DEFAULT_SELECTION_CAP = 5


@dataclass(frozen=True)
class ScoreGrid:
    """Admissible test scores: ``score_min, score_min+step, ..., score_max``.

    Defaults match the classic 200-800, 10-point exam scale, but the grid is
    configurable because newer exam editions use different scales.
    """

    score_min: int = DEFAULT_SCORE_MIN
    score_max: int = DEFAULT_SCORE_MAX
    score_step: int = DEFAULT_SCORE_STEP

    def __post_init__(self) -> None:
        if self.score_step <= 0:
            raise ValueError(f"score_step must be positive, got {self.score_step}")
        if self.score_max < self.score_min:
            raise ValueError("score_max must be >= score_min")
        if (self.score_max - self.score_min) % self.score_step != 0:
            raise ValueError("score_max must be reachable from score_min in whole steps")

    def contains(self, value: int) -> bool:
        return (
            self.score_min <= value <= self.score_max
            and (value - self.score_min) % self.score_step == 0
        )

    def levels(self) -> tuple[int, ...]:
        return tuple(range(self.score_min, self.score_max + 1, self.score_step))

    def index_of(self, value: int) -> int:
        if not self.contains(value):
            raise ValueError(f"score {value} is not on the grid {self}")
        return (value - self.score_min) // self.score_step

    def __len__(self) -> int:
        return (self.score_max - self.score_min) // self.score_step + 1


@dataclass(frozen=True)
class ScoreReport:
    """One (candidate, program) selection with the score it was sent under.

    ``test_year`` labels a July-June testing cycle by its starting year.
    ``attempt_index`` counts a candidate's test sittings from 1.
    """

    candidate_id: str
    program_id: str
    score: int
    test_year: int
    attempt_index: int = 1
    major_code: Optional[str] = None
    citizen: Optional[bool] = None


@dataclass(frozen=True)
class Dataset:
    """A collection of score reports plus the grid they live on.

    ``program_index`` maps each program id appearing in ``reports`` to a dense
    integer in ``0..m-1`` (a bijection); rankers use it to address matrix rows.
    """

    reports: tuple[ScoreReport, ...]
    score_grid: ScoreGrid
    program_index: Mapping[str, int]

    @classmethod
    def from_reports(
        cls, reports: Iterable[ScoreReport], score_grid: ScoreGrid | None = None
    ) -> "Dataset":
        """Build a dataset, indexing programs by sorted id for determinism."""
        reports = tuple(reports)
        grid = score_grid if score_grid is not None else ScoreGrid()
        ids = sorted({r.program_id for r in reports})
        return cls(reports=reports, score_grid=grid, program_index={p: k for k, p in enumerate(ids)})

    def programs(self) -> list[str]:
        """Program ids ordered by their dense index."""
        return sorted(self.program_index, key=self.program_index.__getitem__)

    def n_programs(self) -> int:
        return len(self.program_index)

    def __len__(self) -> int:
        return len(self.reports)


class RankingMethod(str, Enum):
    M = "m"
    M_PLUS_RECURSIVE = "mplus"
    TOURNAMENT = "tournament"
    BETA = "beta"


@dataclass(frozen=True)
class RankingEntry:
    program_id: str
    metric_value: float
    rank: int


@dataclass(frozen=True)
class Ranking:
    """An ordered program list with per-program metric values and tie metadata.

    ``tie_groups`` lists the rank values (1-based) of maximal runs of entries
    sharing one metric value; only groups of two or more are recorded. Ties are
    preserved and reported, never silently broken: consumers pick a tie-break.
    """

    entries: tuple[RankingEntry, ...]
    method: RankingMethod
    tie_groups: tuple[tuple[int, ...], ...] = ()

    @classmethod
    def from_scores(
        cls,
        method: RankingMethod,
        scored: Iterable[tuple[str, float]],
        extra_keys: Mapping[str, tuple] | None = None,
    ) -> "Ranking":
        """Rank by metric descending; ties ordered by ``extra_keys`` then id.

        ``extra_keys`` maps program id to a tuple of secondary sort keys used
        in descending order (e.g. total tournament points). The metric, not
        the tie-break, defines the recorded tie groups.
        """
        items = list(scored)

        def sort_key(item: tuple[str, float]):
            pid, value = item
            extra = extra_keys.get(pid, ()) if extra_keys else ()
            return (-value, tuple(-e for e in extra), pid)

        items.sort(key=sort_key)
        entries = tuple(
            RankingEntry(program_id=pid, metric_value=float(value), rank=k + 1)
            for k, (pid, value) in enumerate(items)
        )
        return cls(entries=entries, method=method, tie_groups=_tie_groups(entries))

    @classmethod
    def from_ordered(
        cls, method: RankingMethod, ordered: Iterable[tuple[str, float]]
    ) -> "Ranking":
        """Wrap an externally determined order, keeping its metric values."""
        entries = tuple(
            RankingEntry(program_id=pid, metric_value=float(value), rank=k + 1)
            for k, (pid, value) in enumerate(ordered)
        )
        return cls(entries=entries, method=method, tie_groups=_tie_groups(entries))

    def program_ids(self) -> list[str]:
        return [e.program_id for e in self.entries]

    def metric_map(self) -> dict[str, float]:
        return {e.program_id: e.metric_value for e in self.entries}

    def rank_of(self, program_id: str) -> int:
        for e in self.entries:
            if e.program_id == program_id:
                return e.rank
        raise KeyError(program_id)

    def __len__(self) -> int:
        return len(self.entries)


def _tie_groups(entries: Sequence[RankingEntry]) -> tuple[tuple[int, ...], ...]:
    groups: list[tuple[int, ...]] = []
    run: list[int] = []
    for e in entries:
        if run and entries[run[-1] - 1].metric_value == e.metric_value:
            run.append(e.rank)
        else:
            if len(run) >= 2:
                groups.append(tuple(run))
            run = [e.rank]
    if len(run) >= 2:
        groups.append(tuple(run))
    return tuple(groups)


@dataclass(frozen=True)
class Violation:
    """One data-quality finding: the rule broken and where."""

    rule: str
    message: str
    row: Optional[int] = None

    def __str__(self) -> str:
        where = f"row {self.row}: " if self.row is not None else ""
        return f"{where}{self.message} [{self.rule}]"


def validate_dataset(
    dataset: Dataset, selection_cap: int | None = DEFAULT_SELECTION_CAP
) -> list[Violation]:
    """Check every type invariant; violations are data, not failures.

    Returns an empty list iff the dataset is clean. ``selection_cap`` bounds
    the number of distinct programs per (candidate, attempt); pass ``None`` to
    skip the cap check (selections beyond the free allowance cost a fee, so
    real data can legitimately exceed it).
    """
    violations: list[Violation] = []
    grid = dataset.score_grid
    for row, r in enumerate(dataset.reports):
        if not r.candidate_id:
            violations.append(Violation("candidate-id", "empty candidate_id", row))
        if not r.program_id:
            violations.append(Violation("program-id", "empty program_id", row))
        if not grid.contains(r.score):
            violations.append(
                Violation(
                    "score-grid",
                    f"score {r.score} off grid "
                    f"[{grid.score_min}..{grid.score_max} step {grid.score_step}]",
                    row,
                )
            )
        if r.attempt_index < 1:
            violations.append(
                Violation("attempt-index", f"attempt_index {r.attempt_index} < 1", row)
            )

    present = {r.program_id for r in dataset.reports}
    indexed = set(dataset.program_index)
    if present != indexed:
        violations.append(
            Violation(
                "program-index",
                f"program_index keys do not match programs in reports "
                f"(missing={sorted(present - indexed)}, stale={sorted(indexed - present)})",
            )
        )
    values = sorted(dataset.program_index.values())
    if values != list(range(len(values))):
        violations.append(Violation("program-index", "index values are not a bijection onto 0..m-1"))

    if selection_cap is not None:
        per_attempt: dict[tuple[str, int], set[str]] = {}
        first_row: dict[tuple[str, int], int] = {}
        for row, r in enumerate(dataset.reports):
            key = (r.candidate_id, r.attempt_index)
            per_attempt.setdefault(key, set()).add(r.program_id)
            first_row.setdefault(key, row)
        for key, programs in sorted(per_attempt.items()):
            if len(programs) > selection_cap:
                violations.append(
                    Violation(
                        "selection-cap",
                        f"candidate {key[0]} attempt {key[1]} selected "
                        f"{len(programs)} distinct programs (cap {selection_cap})",
                        first_row[key],
                    )
                )
    return violations
