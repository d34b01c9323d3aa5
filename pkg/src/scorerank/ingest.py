"""Parse, deduplicate, and filter score-report CSVs into datasets.

The shipped CSV schema is exact:

    candidate_id,program_id,score,test_year,attempt_index,major_code,citizen

with ``citizen`` in {0, 1, empty}, ``major_code`` a free string, newline
``\\n``, no quoting. Filters reproduce the cleaning rules used on the real
data: keep each retaker's best attempt, drop thin programs, and cut
subgroups by major, citizenship, or test period.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from .domain import DEFAULT_SELECTION_CAP, Dataset, ScoreGrid, ScoreReport

CSV_COLUMNS = (
    "candidate_id",
    "program_id",
    "score",
    "test_year",
    "attempt_index",
    "major_code",
    "citizen",
)
REQUIRED_COLUMNS = CSV_COLUMNS[:5]

DEFAULT_MIN_REPORTS = 122  # thin programs cannot cover the score range
DEFAULT_PERIOD_BOUNDARY = 2011  # cycles starting July 2011 count as "later"


class IngestError(Exception):
    """Unrecoverable ingest problem (bad schema, unparseable rows, IO)."""


class MajorGroup(str, Enum):
    ACCOUNTING = "Accounting"
    ARTS = "Arts"
    ENGINEERING = "Engineering"
    FINANCE = "Finance"
    MATH_CS = "MathCS"
    OTHER_BUSINESS = "OtherBusiness"
    SOCIAL_SCIENCES = "SocialSciences"
    SCIENCES = "Sciences"
    ECONOMICS = "Economics"
    UNKNOWN = "Unknown"


class Major2(str, Enum):
    BUSINESS_ECON = "BusinessEcon"
    OTHER = "Other"


_BUSINESS_GROUPS = {
    MajorGroup.ACCOUNTING,
    MajorGroup.FINANCE,
    MajorGroup.ECONOMICS,
    MajorGroup.OTHER_BUSINESS,
}


def two_group(group: MajorGroup) -> Major2:
    return Major2.BUSINESS_ECON if group in _BUSINESS_GROUPS else Major2.OTHER


def load_major_groups(path=None) -> dict[str, MajorGroup]:
    """Raw major code (lowercased) to ten-way group; ships as an editable file."""
    if path is None:
        source = resources.files("scorerank.data").joinpath("major_groups.csv")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    mapping: dict[str, MajorGroup] = {}
    for row in csv.DictReader(rows):
        mapping[row["raw_code"].strip().lower()] = MajorGroup(row["group"].strip())
    return mapping


def major_group_of(code: Optional[str], mapping: dict[str, MajorGroup]) -> MajorGroup:
    """Unknown or missing codes map to Unknown, never an error."""
    if not code:
        return MajorGroup.UNKNOWN
    return mapping.get(code.strip().lower(), MajorGroup.UNKNOWN)


@dataclass(frozen=True)
class Subgroup:
    """A candidate-subset predicate: major group(s), citizenship, or period."""

    kind: str  # "major2" | "major10" | "citizen" | "period"
    value: object
    boundary: int = DEFAULT_PERIOD_BOUNDARY

    @classmethod
    def parse(cls, text: str) -> "Subgroup":
        """Parse CLI specs like ``citizen=0``, ``major2=BusinessEcon``,
        ``major10=Engineering,MathCS``, ``period=early:2011``."""
        try:
            kind, raw = text.split("=", 1)
        except ValueError:
            raise IngestError(f"subgroup spec must look like kind=value, got {text!r}")
        kind = kind.strip().lower()
        raw = raw.strip()
        if kind == "citizen":
            if raw not in {"0", "1"}:
                raise IngestError(f"citizen subgroup takes 0 or 1, got {raw!r}")
            return cls(kind="citizen", value=raw == "1")
        if kind == "major2":
            return cls(kind="major2", value=Major2(raw))
        if kind == "major10":
            groups = frozenset(MajorGroup(part.strip()) for part in raw.split(","))
            return cls(kind="major10", value=groups)
        if kind == "period":
            boundary = DEFAULT_PERIOD_BOUNDARY
            if ":" in raw:
                raw, bound = raw.split(":", 1)
                boundary = int(bound)
            if raw not in {"early", "later"}:
                raise IngestError(f"period subgroup takes early or later, got {raw!r}")
            return cls(kind="period", value=raw, boundary=boundary)
        raise IngestError(f"unknown subgroup kind {kind!r}")


@dataclass(frozen=True)
class IngestConfig:
    min_reports_per_program: int = DEFAULT_MIN_REPORTS
    best_attempt_only: bool = False
    year_range: Optional[tuple[int, int]] = None
    subgroup: Optional[Subgroup] = None
    strict_cap: bool = False
    selection_cap: int = DEFAULT_SELECTION_CAP
    score_grid: ScoreGrid = ScoreGrid()

    def __post_init__(self) -> None:
        if self.min_reports_per_program < 0:
            raise ValueError("min_reports_per_program must be >= 0")


def parse_csv(path, config: IngestConfig | None = None) -> Dataset:
    """Read score reports; one report per row, deduplicated within attempt.

    Row-level problems are collected with their line numbers and raised
    together. Rows repeating a (candidate, attempt, program) triple collapse
    to the first occurrence. With ``strict_cap`` an attempt selecting more
    than ``selection_cap`` distinct programs is an error; otherwise the cap
    is left to ``validate_dataset`` to report.
    """
    config = config or IngestConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"missing required columns: {', '.join(missing)}")

    errors: list[str] = []
    reports: list[ScoreReport] = []
    seen: set[tuple[str, int, str]] = set()
    for line_num, row in enumerate(reader, start=2):
        try:
            report = _parse_row(row)
        except ValueError as exc:
            errors.append(f"line {line_num}: {exc}")
            continue
        key = (report.candidate_id, report.attempt_index, report.program_id)
        if key in seen:
            continue
        seen.add(key)
        reports.append(report)
    if errors:
        raise IngestError("unparseable rows:\n" + "\n".join(errors))

    if config.strict_cap:
        per_attempt: dict[tuple[str, int], set[str]] = {}
        for r in reports:
            per_attempt.setdefault((r.candidate_id, r.attempt_index), set()).add(r.program_id)
        over = sorted(k for k, v in per_attempt.items() if len(v) > config.selection_cap)
        if over:
            listed = ", ".join(f"{c}/attempt {a}" for c, a in over[:5])
            raise IngestError(
                f"{len(over)} attempt(s) exceed the selection cap of "
                f"{config.selection_cap}: {listed}"
            )
    return Dataset.from_reports(reports, config.score_grid)


def _parse_row(row: dict[str, str]) -> ScoreReport:
    candidate = (row.get("candidate_id") or "").strip()
    program = (row.get("program_id") or "").strip()
    if not candidate:
        raise ValueError("empty candidate_id")
    if not program:
        raise ValueError("empty program_id")
    try:
        score = int(row["score"])
    except (ValueError, TypeError):
        raise ValueError(f"unparseable score {row.get('score')!r}")
    try:
        year = int(row["test_year"])
    except (ValueError, TypeError):
        raise ValueError(f"unparseable test_year {row.get('test_year')!r}")
    try:
        attempt = int(row["attempt_index"])
    except (ValueError, TypeError):
        raise ValueError(f"unparseable attempt_index {row.get('attempt_index')!r}")
    major = (row.get("major_code") or "").strip() or None
    raw_citizen = (row.get("citizen") or "").strip()
    if raw_citizen == "":
        citizen = None
    elif raw_citizen in {"0", "1"}:
        citizen = raw_citizen == "1"
    else:
        raise ValueError(f"citizen must be 0, 1, or empty, got {raw_citizen!r}")
    return ScoreReport(
        candidate_id=candidate,
        program_id=program,
        score=score,
        test_year=year,
        attempt_index=attempt,
        major_code=major,
        citizen=citizen,
    )


def write_csv(dataset: Dataset, path) -> None:
    """Write the exact shipped schema; round-trips through ``parse_csv``."""
    lines = [",".join(CSV_COLUMNS)]
    for r in dataset.reports:
        citizen = "" if r.citizen is None else ("1" if r.citizen else "0")
        lines.append(
            f"{r.candidate_id},{r.program_id},{r.score},{r.test_year},"
            f"{r.attempt_index},{r.major_code or ''},{citizen}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def best_attempt_filter(dataset: Dataset) -> Dataset:
    """Keep each candidate's best-scoring attempt (ties: latest attempt)."""
    best: dict[str, tuple[int, int]] = {}
    for r in dataset.reports:
        key = (r.score, r.attempt_index)
        if r.candidate_id not in best:
            best[r.candidate_id] = key
        else:
            best[r.candidate_id] = max(best[r.candidate_id], key)
    kept = [r for r in dataset.reports if r.attempt_index == best[r.candidate_id][1]]
    return Dataset.from_reports(kept, dataset.score_grid)


def min_reports_filter(dataset: Dataset, threshold: int = DEFAULT_MIN_REPORTS) -> Dataset:
    """Drop programs with fewer than ``threshold`` reports, in a single pass.

    Removing a thin program does not change any other program's report count,
    so a second pass has nothing left to do; still, the semantics is
    documented as single-pass and applied after the other filters.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    counts: dict[str, int] = {}
    for r in dataset.reports:
        counts[r.program_id] = counts.get(r.program_id, 0) + 1
    kept = [r for r in dataset.reports if counts[r.program_id] >= threshold]
    return Dataset.from_reports(kept, dataset.score_grid)


def subgroup_filter(
    dataset: Dataset,
    subgroup: Subgroup,
    major_mapping: dict[str, MajorGroup] | None = None,
) -> Dataset:
    """Retain the rows matching a subgroup predicate.

    Citizenship and major are candidate-level attributes (taken from a
    candidate's first tagged report; untagged candidates never match a
    citizenship or major predicate). The period split is row-level on the
    test-year label: years before the boundary are "early", the rest "later".
    """
    if subgroup.kind == "period":
        if subgroup.value == "early":
            kept = [r for r in dataset.reports if r.test_year < subgroup.boundary]
        else:
            kept = [r for r in dataset.reports if r.test_year >= subgroup.boundary]
        return Dataset.from_reports(kept, dataset.score_grid)

    if subgroup.kind == "citizen":
        attr: dict[str, bool] = {}
        for r in dataset.reports:
            if r.citizen is not None and r.candidate_id not in attr:
                attr[r.candidate_id] = r.citizen
        kept = [r for r in dataset.reports if attr.get(r.candidate_id) is subgroup.value]
        return Dataset.from_reports(kept, dataset.score_grid)

    mapping = major_mapping if major_mapping is not None else load_major_groups()
    major_of: dict[str, MajorGroup] = {}
    for r in dataset.reports:
        if r.major_code is not None and r.candidate_id not in major_of:
            major_of[r.candidate_id] = major_group_of(r.major_code, mapping)

    if subgroup.kind == "major10":
        target = subgroup.value

        def matches(cand: str) -> bool:
            return major_of.get(cand, MajorGroup.UNKNOWN) in target

    elif subgroup.kind == "major2":

        def matches(cand: str) -> bool:
            return two_group(major_of.get(cand, MajorGroup.UNKNOWN)) is subgroup.value

    else:
        raise IngestError(f"unknown subgroup kind {subgroup.kind!r}")
    kept = [r for r in dataset.reports if matches(r.candidate_id)]
    return Dataset.from_reports(kept, dataset.score_grid)


def year_range_filter(dataset: Dataset, year_range: tuple[int, int]) -> Dataset:
    lo, hi = year_range
    kept = [r for r in dataset.reports if lo <= r.test_year <= hi]
    return Dataset.from_reports(kept, dataset.score_grid)


def apply_filters(dataset: Dataset, config: IngestConfig) -> Dataset:
    """Run the configured cleaning pipeline; the thin-program cut goes last."""
    out = dataset
    if config.year_range is not None:
        out = year_range_filter(out, config.year_range)
    if config.subgroup is not None:
        out = subgroup_filter(out, config.subgroup)
    if config.best_attempt_only:
        out = best_attempt_filter(out)
    if config.min_reports_per_program > 0:
        out = min_reports_filter(out, config.min_reports_per_program)
    return out
