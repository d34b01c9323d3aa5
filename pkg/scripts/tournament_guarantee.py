"""Empirical check of the tournament's correct-vs-incorrect guarantee.

For a fixed utility function, comparing the exclusive selections of a
higher-scoring student against a lower-scoring one is guaranteed to produce
at least 33% more correct than incorrect pairwise inferences when everyone
applies to five programs. This script samples markets across wide parameter
regimes and prints the observed ratio distribution, which in practice sits
far above the worst-case bound.
"""

import argparse

import numpy as np

import scorerank as sr
from scorerank.rankers import pairwise_correctness_ratio
from scorerank.simgen import portfolios_by_score, sample_utilities


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--markets", type=int, default=100)
    parser.add_argument("--budget", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7777)
    args = parser.parse_args()

    grid = sr.ScoreGrid()
    rng = np.random.default_rng(args.seed)
    finite = []
    all_correct = 0
    empty = 0
    below_bound = 0
    for _ in range(args.markets):
        m = int(rng.integers(5, 20))
        thresholds = np.sort(rng.uniform(250, 795, m))
        anchor = grid.score_min - thresholds.max() - rng.uniform(1, 50)
        market = sr.Market(
            program_ids=tuple(f"p{j:02d}" for j in range(m)),
            thresholds=thresholds,
            noise=sr.NoiseCdf(rate=float(10 ** rng.uniform(-3, -0.7)), anchor=float(anchor)),
            utility_law=sr.UtilityLaw(
                gamma=float(rng.uniform(0, 3)), sigma=float(rng.uniform(0, 3))
            ),
            budget_rule=sr.BudgetRule.constant(args.budget),
            score_grid=grid,
        )
        utilities = sample_utilities(market, rng)
        ports = portfolios_by_score(market, utilities)
        data = [(s, set(pf.program_ids())) for s, pf in ports.items()]
        correct, incorrect = pairwise_correctness_ratio(data, market.ground_truth())
        if correct < 1.33 * incorrect:
            below_bound += 1
        if correct == incorrect == 0:
            empty += 1
        elif incorrect == 0:
            all_correct += 1
        else:
            finite.append(correct / incorrect)

    print(f"{args.markets} markets at budget {args.budget}:")
    print(f"  below the 1.33x bound : {below_bound}")
    print(f"  all inferences correct: {all_correct}")
    print(f"  no comparisons at all : {empty}")
    if finite:
        arr = np.array(finite)
        print(
            f"  finite ratios         : n={len(arr)} "
            f"min={arr.min():.1f} median={np.median(arr):.1f} max={arr.max():.1f}"
        )


if __name__ == "__main__":
    main()
