"""The student's application-portfolio problem.

A student applying to a set of programs only attends the best one that admits
them, so a portfolio ``{c^1, ..., c^K}`` with utilities ``v(c^1) <= ... <=
v(c^K)`` and admission probabilities ``p`` is worth

    U = p_K v_K + p_{K-1} v_{K-1} (1 - p_K) + ... + p_1 v_1 prod_{l>=2}(1 - p_l).

Under the duplicate-programs assumption (a student may apply to the same
program more than once) the optimum has an exact greedy recursion:

    V(0) = 0,   V(k) = max_c { p(c) v(c) + (1 - p(c)) V(k-1) },

and the k-th chosen utility is weakly increasing in k. A brute-force
enumerator is provided as an independent test oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .domain import ScoreGrid

BRUTE_FORCE_MAX_OFFERS = 12
BRUTE_FORCE_MAX_BUDGET = 5


@dataclass(frozen=True)
class CollegeOffer:
    """A program priced for one student: admission probability and utility."""

    program_id: str
    admit_prob: float
    utility: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.admit_prob <= 1.0:
            raise ValueError(f"admit_prob must lie in [0, 1], got {self.admit_prob}")
        if not self.utility > 0.0:
            raise ValueError(f"utility must be strictly positive, got {self.utility}")


@dataclass(frozen=True)
class Portfolio:
    """A chosen application list (utilities non-decreasing) and its value."""

    offers: tuple[CollegeOffer, ...]
    value: float

    def program_ids(self) -> list[str]:
        return [o.program_id for o in self.offers]

    def program_set(self) -> frozenset[str]:
        return frozenset(o.program_id for o in self.offers)

    def __len__(self) -> int:
        return len(self.offers)


class BudgetRule:
    """Maps a score to the number of applications allowed (weakly increasing)."""

    def __init__(self, fn: Callable[[int], int]):
        self._fn = fn

    def __call__(self, score: int) -> int:
        k = int(self._fn(score))
        if k < 0:
            raise ValueError(f"budget must be non-negative, got {k} at score {score}")
        return k

    @classmethod
    def constant(cls, k: int) -> "BudgetRule":
        return cls(lambda s: k)

    @classmethod
    def step(cls, grid: ScoreGrid, cap: int = 5, width: int = 150) -> "BudgetRule":
        """Default rule: one application per ``width`` points above the grid
        minimum, capped at the free-report allowance."""
        return cls(lambda s: min(cap, 1 + (s - grid.score_min) // width))

    @classmethod
    def from_table(cls, table: dict[int, int]) -> "BudgetRule":
        return cls(lambda s: table[s])

    def is_monotone(self, grid: ScoreGrid) -> bool:
        values = [self(s) for s in grid.levels()]
        return all(a <= b for a, b in zip(values, values[1:]))


def expected_utility(offers: Iterable[CollegeOffer]) -> float:
    """Value of applying to ``offers``; invariant to input order, 0 if empty."""
    value = 0.0
    for o in sorted(offers, key=lambda o: o.utility):
        value = o.admit_prob * o.utility + (1.0 - o.admit_prob) * value
    return value


def undominated(offers: Sequence[CollegeOffer]) -> list[CollegeOffer]:
    """Drop offers beaten on utility strictly and admit_prob weakly.

    Keeps exactly the offers ``c`` with no ``c'`` such that
    ``utility(c') > utility(c)`` and ``admit_prob(c') >= admit_prob(c)``; exact
    ties in both fields keep all copies. Input order is preserved.
    """
    offers = list(offers)
    order = sorted(range(len(offers)), key=lambda i: -offers[i].utility)
    keep = [False] * len(offers)
    best_prob = float("-inf")
    i = 0
    while i < len(order):
        j = i
        level = offers[order[i]].utility
        while j < len(order) and offers[order[j]].utility == level:
            j += 1
        group = order[i:j]
        for idx in group:
            keep[idx] = offers[idx].admit_prob > best_prob
        best_prob = max(best_prob, max(offers[idx].admit_prob for idx in group))
        i = j
    return [o for o, k in zip(offers, keep) if k]


def optimal_portfolio(
    offers: Sequence[CollegeOffer], budget: int, allow_duplicates: bool = True
) -> Portfolio:
    """Build the greedy-recursive portfolio of size <= ``budget``.

    With ``allow_duplicates`` (the model's assumption) position ``k`` takes the
    offer maximizing ``p v + (1 - p) V(k-1)``, which is exactly optimal; the
    same offer may fill several positions. Without duplicates the recursion is
    a heuristic that brute force can strictly beat. Argmax ties break toward
    higher utility, then the lower position in ``offers``.
    """
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    if budget == 0:
        return Portfolio(offers=(), value=0.0)
    if not offers:
        raise ValueError("cannot build a non-empty portfolio from no offers")

    available = list(range(len(offers)))
    chosen: list[int] = []
    value = 0.0
    for _ in range(budget):
        if not available:
            break
        best = None
        best_obj = float("-inf")
        for i in available:
            o = offers[i]
            obj = o.admit_prob * o.utility + (1.0 - o.admit_prob) * value
            if (
                best is None
                or obj > best_obj
                or (obj == best_obj and (o.utility, -i) > (offers[best].utility, -best))
            ):
                best = i
                best_obj = obj
        if not allow_duplicates and best_obj < value:
            break  # every remaining offer would lower the value; stop early
        chosen.append(best)
        value = best_obj
        if not allow_duplicates:
            available.remove(best)
    return Portfolio(offers=tuple(offers[i] for i in chosen), value=value)


def brute_force_portfolio(
    offers: Sequence[CollegeOffer], budget: int, allow_duplicates: bool = True
) -> Portfolio:
    """Enumerate every portfolio of size <= ``budget`` and keep the best.

    Test oracle only; guarded to at most 12 offers and budget 5 because
    enumeration is combinatorial (multisets when ``allow_duplicates``,
    subsets otherwise).
    """
    if len(offers) > BRUTE_FORCE_MAX_OFFERS or budget > BRUTE_FORCE_MAX_BUDGET:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_OFFERS} offers "
            f"and budget {BRUTE_FORCE_MAX_BUDGET}"
        )
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    combine = (
        itertools.combinations_with_replacement if allow_duplicates else itertools.combinations
    )
    best_combo: tuple[int, ...] = ()
    best_value = 0.0
    pool = range(len(offers))
    for size in range(1, budget + 1):
        for combo in combine(pool, size):
            value = expected_utility([offers[i] for i in combo])
            if value > best_value:
                best_value = value
                best_combo = combo
    picked = sorted((offers[i] for i in best_combo), key=lambda o: o.utility)
    return Portfolio(offers=tuple(picked), value=best_value)


def admit_prob(score: float, threshold: float, noise, strict: bool = False) -> float:
    """Admission probability ``F(score - threshold)`` under the noise CDF.

    With ``strict`` the argument must lie in the CDF's declared concave
    region ``[anchor, inf)``; outside it the comparative-statics guarantees
    do not apply.
    """
    x = float(score) - float(threshold)
    if strict and x < noise.anchor:
        raise ValueError(
            f"score - threshold = {x} falls left of the concave region anchor {noise.anchor}"
        )
    return float(noise.cdf(x))
