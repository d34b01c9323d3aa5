import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scorerank.choice import (
    BudgetRule,
    CollegeOffer,
    admit_prob,
    brute_force_portfolio,
    expected_utility,
    optimal_portfolio,
    undominated,
)
from scorerank.domain import ScoreGrid
from scorerank.simgen import NoiseCdf

offer_st = st.builds(
    CollegeOffer,
    program_id=st.sampled_from([f"p{k}" for k in range(20)]),
    admit_prob=st.floats(0.0, 1.0),
    utility=st.floats(0.01, 100.0),
)


def offers_from(pairs):
    return [CollegeOffer(f"p{k}", p, v) for k, (p, v) in enumerate(pairs)]


class TestExpectedUtility:
    def test_empty_portfolio_is_worthless(self):
        assert expected_utility([]) == 0.0

    def test_single_offer(self):
        assert expected_utility(offers_from([(0.5, 2.0)])) == 1.0

    def test_two_offer_hand_value(self):
        # 0.5*2 + 0.5*0.5*1
        assert expected_utility(offers_from([(0.5, 1.0), (0.5, 2.0)])) == pytest.approx(1.25)

    @given(st.lists(offer_st, max_size=8), st.randoms(use_true_random=False))
    def test_order_invariance(self, offers, rnd):
        shuffled = list(offers)
        rnd.shuffle(shuffled)
        assert expected_utility(shuffled) == pytest.approx(expected_utility(offers), abs=1e-12)

    def test_rejects_invalid_offers(self):
        with pytest.raises(ValueError):
            CollegeOffer("p", 0.5, 0.0)
        with pytest.raises(ValueError):
            CollegeOffer("p", 0.5, -1.0)
        with pytest.raises(ValueError):
            CollegeOffer("p", 1.5, 1.0)


class TestUndominated:
    def test_pareto_frontier_kept(self):
        offers = offers_from([(0.9, 1.0), (0.5, 2.0)])
        assert undominated(offers) == offers

    def test_strictly_better_utility_wins_at_equal_prob(self):
        offers = offers_from([(0.9, 1.0), (0.9, 2.0)])
        assert undominated(offers) == [offers[1]]

    def test_exact_ties_keep_all_copies(self):
        offers = offers_from([(0.9, 2.0), (0.9, 2.0)])
        assert undominated(offers) == offers

    @given(st.lists(offer_st, max_size=20))
    def test_matches_quadratic_scan(self, offers):
        def dominated(c):
            return any(
                o.utility > c.utility and o.admit_prob >= c.admit_prob for o in offers
            )

        expected = [o for o in offers if not dominated(o)]
        assert undominated(offers) == expected


class TestOptimalPortfolio:
    def test_zero_budget(self):
        pf = optimal_portfolio(offers_from([(0.5, 1.0)]), 0)
        assert pf.offers == () and pf.value == 0.0

    def test_single_pick_compares_pv(self):
        offers = offers_from([(0.9, 1.0), (0.3, 2.0)])  # 0.9 vs 0.6
        pf = optimal_portfolio(offers, 1)
        assert pf.program_ids() == ["p0"]
        assert pf.value == pytest.approx(0.9)

    def test_empty_offers_with_positive_budget(self):
        with pytest.raises(ValueError):
            optimal_portfolio([], 1)

    def test_matches_brute_force_with_duplicates(self):
        rng = np.random.default_rng(7)
        for _ in range(80):
            n = rng.integers(1, 7)
            offers = offers_from(zip(rng.uniform(0, 1, n), rng.uniform(0.1, 10, n)))
            pool = undominated(offers)
            budget = int(rng.integers(1, 5))
            greedy = optimal_portfolio(pool, budget, allow_duplicates=True)
            brute = brute_force_portfolio(pool, budget, allow_duplicates=True)
            assert greedy.value == pytest.approx(brute.value, abs=1e-9)

    def test_value_monotone_in_budget(self):
        rng = np.random.default_rng(11)
        offers = offers_from(zip(rng.uniform(0, 1, 8), rng.uniform(0.1, 10, 8)))
        values = [optimal_portfolio(offers, k).value for k in range(7)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_chosen_utilities_non_decreasing(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = rng.integers(1, 9)
            offers = offers_from(zip(rng.uniform(0, 1, n), rng.uniform(0.1, 10, n)))
            pf = optimal_portfolio(offers, int(rng.integers(1, 6)))
            utils = [o.utility for o in pf.offers]
            assert utils == sorted(utils)

    def test_brute_force_can_beat_greedy_without_duplicates(self):
        # greedy takes p3 then p4; the true best pair is {p0, p3}
        offers = offers_from(
            [(0.71, 4.52), (0.21, 0.77), (0.83, 1.68), (0.54, 6.87), (0.32, 6.65)]
        )
        greedy = optimal_portfolio(offers, 2, allow_duplicates=False)
        brute = brute_force_portfolio(offers, 2, allow_duplicates=False)
        assert greedy.program_ids() == ["p3", "p4"]
        assert sorted(brute.program_ids()) == ["p0", "p3"]
        assert brute.value > greedy.value + 1e-6

    def test_brute_force_never_below_greedy_without_duplicates(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            n = rng.integers(2, 8)
            offers = offers_from(zip(rng.uniform(0, 1, n), rng.uniform(0.1, 10, n)))
            budget = int(rng.integers(1, min(n, 4) + 1))
            greedy = optimal_portfolio(offers, budget, allow_duplicates=False)
            brute = brute_force_portfolio(offers, budget, allow_duplicates=False)
            assert brute.value >= greedy.value - 1e-12

    def test_brute_force_guard(self):
        offers = offers_from([(0.5, 1.0)] * 13)
        with pytest.raises(ValueError):
            brute_force_portfolio(offers, 2)
        with pytest.raises(ValueError):
            brute_force_portfolio(offers[:3], 6)


class TestComparativeStatics:
    def test_position_utilities_rise_with_score(self):
        # same programs re-priced at a higher score: every position's chosen
        # utility weakly increases, for any weakly larger budget
        rng = np.random.default_rng(23)
        noise = NoiseCdf(rate=0.01, anchor=-650.0)
        for _ in range(120):
            m = int(rng.integers(2, 10))
            thresholds = rng.uniform(400, 800, m)
            utils = rng.lognormal(1.0, 1.0, m)
            s_lo, s_hi = sorted(rng.choice(np.arange(200, 801, 10), 2, replace=False))
            k_lo = int(rng.integers(1, 6))
            k_hi = k_lo + int(rng.integers(0, 3))

            def portfolio(score, budget):
                offers = [
                    CollegeOffer(f"p{j}", admit_prob(score, thresholds[j], noise), utils[j])
                    for j in range(m)
                ]
                return optimal_portfolio(undominated(offers), budget)

            lo = portfolio(int(s_lo), k_lo)
            hi = portfolio(int(s_hi), k_hi)
            for k in range(min(len(lo.offers), len(hi.offers))):
                assert lo.offers[k].utility <= hi.offers[k].utility


class TestAdmitProb:
    def test_closed_form_at_threshold(self):
        noise = NoiseCdf(rate=0.2, anchor=-10.0)
        assert admit_prob(700, 700, noise) == pytest.approx(1 - math.exp(-2.0))

    def test_left_endpoint_is_zero(self):
        noise = NoiseCdf(rate=0.2, anchor=-10.0)
        assert admit_prob(690, 700, noise) == 0.0

    def test_limit_is_one(self):
        noise = NoiseCdf(rate=0.2, anchor=-10.0)
        assert admit_prob(10_000, 0, noise) == pytest.approx(1.0)

    def test_strict_mode_rejects_arguments_left_of_anchor(self):
        noise = NoiseCdf(rate=0.2, anchor=-10.0)
        with pytest.raises(ValueError):
            admit_prob(600, 650, noise, strict=True)
        assert admit_prob(600, 650, noise, strict=False) == 0.0


class TestBudgetRule:
    def test_step_rule_is_monotone_and_capped(self):
        grid = ScoreGrid()
        rule = BudgetRule.step(grid)
        assert rule.is_monotone(grid)
        assert rule(200) == 1 and rule(800) == 5

    def test_negative_budget_rejected(self):
        rule = BudgetRule(lambda s: -1)
        with pytest.raises(ValueError):
            rule(500)
