import pytest
from hypothesis import given, strategies as st

from scorerank.domain import (
    Dataset,
    Ranking,
    RankingMethod,
    ScoreGrid,
    ScoreReport,
    validate_dataset,
)


def report(cand="c1", prog="A", score=700, year=2010, attempt=1, **kw):
    return ScoreReport(cand, prog, score, year, attempt, **kw)


class TestScoreGrid:
    def test_defaults(self):
        grid = ScoreGrid()
        assert grid.levels()[0] == 200 and grid.levels()[-1] == 800
        assert len(grid) == 61

    def test_contains_and_index(self):
        grid = ScoreGrid()
        assert grid.contains(200) and grid.contains(800) and grid.contains(550)
        assert not grid.contains(805) and not grid.contains(190) and not grid.contains(555)
        assert grid.index_of(210) == 1
        with pytest.raises(ValueError):
            grid.index_of(555)

    def test_custom_scale(self):
        grid = ScoreGrid(0, 100, 20)
        assert grid.levels() == (0, 20, 40, 60, 80, 100)

    @pytest.mark.parametrize("bad", [(200, 800, 0), (800, 200, 10), (200, 805, 10)])
    def test_invalid_grids(self, bad):
        with pytest.raises(ValueError):
            ScoreGrid(*bad)


class TestValidateDataset:
    def test_empty_dataset_is_clean(self):
        assert validate_dataset(Dataset.from_reports([])) == []

    def test_off_grid_score_names_row_and_rule(self):
        d = Dataset.from_reports([report(score=805)])
        violations = validate_dataset(d)
        assert len(violations) == 1
        assert violations[0].rule == "score-grid"
        assert violations[0].row == 0
        assert "805" in str(violations[0])

    def test_selection_cap_violation(self):
        # one candidate, one attempt, six distinct programs: one over the cap
        d = Dataset.from_reports([report(prog=f"P{k}") for k in range(6)])
        violations = validate_dataset(d, selection_cap=5)
        assert [v.rule for v in violations] == ["selection-cap"]
        assert "6 distinct programs" in violations[0].message

    def test_cap_counts_distinct_programs_per_attempt(self):
        # six reports but only 5 distinct programs: clean
        d = Dataset.from_reports([report(prog=f"P{k}") for k in [0, 1, 2, 3, 4, 4]])
        assert validate_dataset(d, selection_cap=5) == []
        # same six programs split over two attempts: clean
        d = Dataset.from_reports(
            [report(prog=f"P{k}", attempt=1 + (k % 2)) for k in range(6)]
        )
        assert validate_dataset(d, selection_cap=5) == []

    def test_cap_disabled(self):
        d = Dataset.from_reports([report(prog=f"P{k}") for k in range(9)])
        assert validate_dataset(d, selection_cap=None) == []

    def test_empty_ids_and_bad_attempt(self):
        d = Dataset.from_reports([report(cand=""), report(attempt=0)])
        rules = {v.rule for v in validate_dataset(d)}
        assert "candidate-id" in rules and "attempt-index" in rules

    @given(st.sets(st.text(min_size=1, max_size=8), min_size=1, max_size=20))
    def test_program_index_round_trips(self, ids):
        d = Dataset.from_reports([report(prog=p) for p in ids])
        programs = d.programs()
        assert len(programs) == len(ids)
        for k, pid in enumerate(programs):
            assert d.program_index[pid] == k


class TestRanking:
    def test_from_scores_orders_descending(self):
        r = Ranking.from_scores(RankingMethod.M, [("b", 1.0), ("a", 3.0), ("c", 2.0)])
        assert r.program_ids() == ["a", "c", "b"]
        assert [e.rank for e in r.entries] == [1, 2, 3]
        assert r.tie_groups == ()

    def test_ties_grouped_and_broken_by_id(self):
        r = Ranking.from_scores(RankingMethod.M, [("b", 2.0), ("a", 2.0), ("c", 5.0)])
        assert r.program_ids() == ["c", "a", "b"]
        assert r.tie_groups == ((2, 3),)

    def test_extra_keys_break_ties(self):
        r = Ranking.from_scores(
            RankingMethod.TOURNAMENT,
            [("a", 2.0), ("b", 2.0)],
            extra_keys={"a": (10,), "b": (30,)},
        )
        assert r.program_ids() == ["b", "a"]
        assert r.tie_groups == ((1, 2),)  # the metric still ties

    @given(
        st.dictionaries(
            st.text(min_size=1, max_size=6),
            st.floats(allow_nan=False, allow_infinity=False, width=32),
            min_size=1,
            max_size=30,
        )
    )
    def test_rank_permutation_and_monotone_metric(self, scored):
        r = Ranking.from_scores(RankingMethod.M, scored.items())
        ranks = [e.rank for e in r.entries]
        assert sorted(ranks) == list(range(1, len(scored) + 1))
        values = [e.metric_value for e in r.entries]
        assert all(x >= y for x, y in zip(values, values[1:]))
        for group in r.tie_groups:
            assert len(group) >= 2
            vals = {r.entries[i - 1].metric_value for i in group}
            assert len(vals) == 1

    def test_input_order_irrelevant(self):
        items = [("x", 1.0), ("y", 4.0), ("z", 2.0)]
        a = Ranking.from_scores(RankingMethod.M, items)
        b = Ranking.from_scores(RankingMethod.M, reversed(items))
        assert a == b
