"""Synthetic score-report markets with known ground-truth selectivity order.

A market fixes program thresholds, a concave admission-noise CDF, a utility
law, a budget rule, and a score distribution. Students draw a score and a
utility vector, price every program, and pick an optimal portfolio; flattening
those selections yields a dataset whose true program order is known, so the
rankers and the comparative-statics machinery can be verified end to end.

The utility law is a parametric stand-in for fully flexible heterogeneity:

    v_j = (t_j - t_min + 1)^gamma * exp(sigma * eta_j),   eta_j ~ N(0, 1) iid,

where ``gamma`` controls how strongly the common value lines up with
selectivity and ``sigma`` scales idiosyncratic taste noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .choice import BudgetRule, CollegeOffer, Portfolio, admit_prob, optimal_portfolio, undominated
from .domain import Dataset, ScoreGrid, ScoreReport

DEFAULT_TEST_YEAR = 2010
_BATCH_ROWS = 16384  # cap peak memory of the vectorized chooser


@dataclass(frozen=True)
class NoiseCdf:
    """Shifted-exponential CDF ``F(x) = 1 - exp(-rate * (x - anchor))``.

    ``F`` is 0 left of ``anchor`` and concave, strictly increasing on
    ``[anchor, inf)`` -- the simplest CDF concave on a half line. Markets pin
    ``anchor`` low enough that every evaluated argument stays in the concave
    region, which is what the comparative statics require.
    """

    rate: float
    anchor: float
    family: str = "shifted_exponential"

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.family != "shifted_exponential":
            raise ValueError(f"unknown noise family {self.family!r}")

    def cdf(self, x):
        """Evaluate F; accepts scalars or arrays."""
        arr = np.asarray(x, dtype=float)
        out = np.where(arr >= self.anchor, -np.expm1(-self.rate * (arr - self.anchor)), 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class UtilityLaw:
    gamma: float = 1.0
    sigma: float = 0.3

    def __post_init__(self) -> None:
        if self.gamma < 0 or self.sigma < 0:
            raise ValueError("gamma and sigma must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    """True program order, most selective first (threshold ties by id)."""

    order: tuple[str, ...]

    def position(self, program_id: str) -> int:
        return self.order.index(program_id)

    def position_map(self) -> dict[str, int]:
        return {pid: k for k, pid in enumerate(self.order)}

    def __len__(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class Market:
    """Simulation ground truth: thresholds, noise, utility and budget laws."""

    program_ids: tuple[str, ...]
    thresholds: np.ndarray
    noise: NoiseCdf
    utility_law: UtilityLaw = field(default_factory=UtilityLaw)
    budget_rule: BudgetRule | None = None
    score_grid: ScoreGrid = field(default_factory=ScoreGrid)
    score_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        thresholds = np.asarray(self.thresholds, dtype=float)
        object.__setattr__(self, "thresholds", thresholds)
        if len(self.program_ids) != len(thresholds):
            raise ValueError("one threshold per program required")
        if len(set(self.program_ids)) != len(self.program_ids):
            raise ValueError("program ids must be unique")
        if self.noise.anchor > self.score_grid.score_min - thresholds.max():
            raise ValueError(
                "noise anchor must satisfy anchor <= min(score) - max(threshold) so every "
                "evaluated CDF argument lies in the concave region"
            )
        if self.budget_rule is not None and not self.budget_rule.is_monotone(self.score_grid):
            raise ValueError("budget rule must be weakly increasing in score")
        if self.score_weights is not None:
            w = np.asarray(self.score_weights, dtype=float)
            object.__setattr__(self, "score_weights", w)
            if w.shape != (len(self.score_grid),):
                raise ValueError("score_weights must have one entry per grid level")
            if (w < 0).any() or w.sum() <= 0:
                raise ValueError("score_weights must be non-negative with positive total")

    @property
    def budget(self) -> BudgetRule:
        return self.budget_rule if self.budget_rule is not None else BudgetRule.step(self.score_grid)

    def ground_truth(self) -> GroundTruth:
        order = sorted(
            range(len(self.program_ids)),
            key=lambda j: (-self.thresholds[j], self.program_ids[j]),
        )
        return GroundTruth(order=tuple(self.program_ids[j] for j in order))


def evenly_spaced_market(
    n_programs: int,
    threshold_min: float,
    threshold_max: float,
    noise: NoiseCdf,
    utility_law: UtilityLaw = UtilityLaw(),
    budget_rule: BudgetRule | None = None,
    score_grid: ScoreGrid | None = None,
    score_weights: np.ndarray | None = None,
) -> Market:
    """Market with ``n_programs`` thresholds evenly spaced over a range."""
    grid = score_grid if score_grid is not None else ScoreGrid()
    width = len(str(max(n_programs - 1, 1)))
    ids = tuple(f"p{j:0{width}d}" for j in range(n_programs))
    thresholds = np.linspace(threshold_min, threshold_max, n_programs)
    return Market(
        program_ids=ids,
        thresholds=thresholds,
        noise=noise,
        utility_law=utility_law,
        budget_rule=budget_rule,
        score_grid=grid,
        score_weights=score_weights,
    )


def sample_utilities(market: Market, rng) -> np.ndarray:
    """Draw one utility vector over programs; strictly positive by construction."""
    rng = np.random.default_rng(rng)
    t = market.thresholds
    base = (t - t.min() + 1.0) ** market.utility_law.gamma
    eta = rng.standard_normal(len(t))
    return base * np.exp(market.utility_law.sigma * eta)


def _draw_scores(market: Market, rng: np.random.Generator, size: int) -> np.ndarray:
    levels = np.asarray(market.score_grid.levels())
    if market.score_weights is None:
        return rng.choice(levels, size=size)
    w = market.score_weights / market.score_weights.sum()
    return rng.choice(levels, size=size, p=w)


def price_offers(market: Market, score: int, utilities: np.ndarray) -> list[CollegeOffer]:
    """All programs priced for a student with this score and utility vector."""
    return [
        CollegeOffer(
            program_id=pid,
            admit_prob=admit_prob(score, market.thresholds[j], market.noise, strict=True),
            utility=float(utilities[j]),
        )
        for j, pid in enumerate(market.program_ids)
    ]


def simulate_student(market: Market, rng) -> tuple[int, Portfolio]:
    """Draw one student and solve their portfolio problem.

    Returns the score and the chosen portfolio (a multiset: under the model's
    duplicate-programs assumption the same program can fill several
    positions). Collapse with ``Portfolio.program_set`` for reporting.
    """
    rng = np.random.default_rng(rng)
    score = int(_draw_scores(market, rng, 1)[0])
    utilities = sample_utilities(market, rng)
    offers = undominated(price_offers(market, score, utilities))
    budget = market.budget(score)
    if budget == 0:
        return score, Portfolio(offers=(), value=0.0)
    return score, optimal_portfolio(offers, budget, allow_duplicates=True)


def _greedy_choice_batch(
    probs: np.ndarray, utils: np.ndarray, budgets: np.ndarray
) -> tuple[list[list[int]], np.ndarray]:
    """Vectorized greedy recursion over a block of students.

    Matches the scalar chooser exactly: position k maximizes
    ``p v + (1 - p) V(k-1)``, ties toward higher utility then lower program
    index. Returns per-student chosen program indices (with repeats) and V.
    """
    n, m = probs.shape
    values = np.zeros(n)
    chosen: list[list[int]] = [[] for _ in range(n)]
    col_idx = np.arange(m)
    for k in range(int(budgets.max(initial=0))):
        active = budgets > k
        if not active.any():
            break
        obj = probs * utils + (1.0 - probs) * values[:, None]
        best_obj = obj.max(axis=1)
        on_max = obj == best_obj[:, None]
        best_util = np.where(on_max, utils, -np.inf).max(axis=1)
        on_tie = on_max & (utils == best_util[:, None])
        picks = np.where(on_tie, col_idx[None, :], m).min(axis=1)
        idx = np.flatnonzero(active)
        for i in idx:
            chosen[i].append(int(picks[i]))
        values[idx] = best_obj[idx]
    return chosen, values


def generate_dataset(
    market: Market,
    n_students: int,
    rng_seed,
    test_year: int = DEFAULT_TEST_YEAR,
) -> Dataset:
    """Simulate ``n_students`` independent students and flatten their selections.

    One report per (student, distinct selected program), single test year,
    attempt 1. Deterministic per seed: scores and utility shocks are drawn up
    front and the vectorized chooser replays the scalar recursion exactly.
    """
    if n_students < 1:
        raise ValueError(f"n_students must be >= 1, got {n_students}")
    rng = np.random.default_rng(rng_seed)
    m = len(market.program_ids)
    scores = _draw_scores(market, rng, n_students)
    eta = rng.standard_normal((n_students, m))

    t = market.thresholds
    base = (t - t.min() + 1.0) ** market.utility_law.gamma
    budgets = np.array([market.budget(int(s)) for s in scores])

    width = len(str(max(n_students - 1, 1)))
    reports: list[ScoreReport] = []
    for start in range(0, n_students, _BATCH_ROWS):
        stop = min(start + _BATCH_ROWS, n_students)
        block_scores = scores[start:stop]
        utils = base[None, :] * np.exp(market.utility_law.sigma * eta[start:stop])
        probs = market.noise.cdf(block_scores[:, None].astype(float) - t[None, :])
        chosen, _ = _greedy_choice_batch(probs, utils, budgets[start:stop])
        for i, picks in enumerate(chosen):
            cand = f"c{start + i:0{width}d}"
            seen: set[int] = set()
            for j in picks:
                if j in seen:
                    continue
                seen.add(j)
                reports.append(
                    ScoreReport(
                        candidate_id=cand,
                        program_id=market.program_ids[j],
                        score=int(block_scores[i]),
                        test_year=test_year,
                        attempt_index=1,
                    )
                )
    return Dataset.from_reports(reports, market.score_grid)


def load_market_config(path) -> Market:
    """Build a market from a TOML config (schema documented in the README).

    Programs come either as explicit ``ids``/``thresholds`` lists or as a
    ``count`` with an evenly spaced threshold range.
    """
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)

    scores = doc.get("scores", {})
    grid = ScoreGrid(
        score_min=scores.get("min", 200),
        score_max=scores.get("max", 800),
        score_step=scores.get("step", 10),
    )
    weights = scores.get("weights")
    weights = np.asarray(weights, dtype=float) if weights else None

    noise_doc = doc.get("noise", {})
    noise = NoiseCdf(rate=float(noise_doc["rate"]), anchor=float(noise_doc["anchor"]))
    utility_doc = doc.get("utility", {})
    law = UtilityLaw(
        gamma=float(utility_doc.get("gamma", 1.0)), sigma=float(utility_doc.get("sigma", 0.3))
    )
    budget_doc = doc.get("budget", {})
    kind = budget_doc.get("kind", "step")
    if kind == "step":
        budget = BudgetRule.step(
            grid, cap=int(budget_doc.get("cap", 5)), width=int(budget_doc.get("width", 150))
        )
    elif kind == "constant":
        budget = BudgetRule.constant(int(budget_doc["value"]))
    else:
        raise ValueError(f"unknown budget kind {kind!r}")

    programs = doc.get("programs", {})
    if "ids" in programs:
        return Market(
            program_ids=tuple(programs["ids"]),
            thresholds=np.asarray(programs["thresholds"], dtype=float),
            noise=noise,
            utility_law=law,
            budget_rule=budget,
            score_grid=grid,
            score_weights=weights,
        )
    return evenly_spaced_market(
        n_programs=int(programs["count"]),
        threshold_min=float(programs["threshold_min"]),
        threshold_max=float(programs["threshold_max"]),
        noise=noise,
        utility_law=law,
        budget_rule=budget,
        score_grid=grid,
        score_weights=weights,
    )


def portfolios_by_score(market: Market, utilities: np.ndarray) -> dict[int, Portfolio]:
    """Optimal portfolio at every grid score for one fixed utility draw.

    This is the per-utility object the comparative-statics checks run on: the
    chosen multiset at each score, budgets from the market's rule.
    """
    out: dict[int, Portfolio] = {}
    for score in market.score_grid.levels():
        offers = undominated(price_offers(market, score, utilities))
        budget = market.budget(score)
        if budget == 0:
            out[score] = Portfolio(offers=(), value=0.0)
        else:
            out[score] = optimal_portfolio(offers, budget, allow_duplicates=True)
    return out
