"""Covariate-based ranking via a piecewise-linear convex program.

Given program features ``x_c`` and the selection-share columns ``g_s(c)``,
score programs with a linear function ``f(c) = beta . x_c`` and penalize
every adjacent score pair where the expected ``f`` moves the wrong way:

    objective(beta) = sum_k max{ E_f(s_k) - E_f(s_{k+1}), 0 },
    E_f(s) = sum_c (beta . x_c) g_s(c),   s_1 < s_2 < ... ascending.

The objective is convex and piecewise linear, zero exactly when the expected
score of the features rises with the test score. It is minimized over a box
by projected subgradient descent with diminishing steps, tracking the best
iterate (plain subgradient steps are not monotone). Ranking programs by
``beta . x_c`` then estimates the underlying order, and the coefficients are
interpretable weights on the observable characteristics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .domain import Ranking, RankingMethod
from .rankers import ScoreDistribution

DEFAULT_MAX_ITERS = 10_000
DEFAULT_STEP_SCALE = 1.0


@dataclass(frozen=True)
class FeatureMatrix:
    """Observable characteristics, one row per program."""

    x: np.ndarray
    feature_names: tuple[str, ...]
    program_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        if x.ndim != 2 or x.shape != (len(self.program_ids), len(self.feature_names)):
            raise ValueError("x must be programs x features")
        if x.shape[1] < 1:
            raise ValueError("at least one feature required")
        if not np.isfinite(x).all():
            raise ValueError("features must be finite")

    @property
    def n_features(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class BetaModel:
    """A fitted coefficient vector, its box constraint, and fit diagnostics."""

    beta: np.ndarray
    box: np.ndarray  # (n, 2) per-coordinate [lo, hi]
    objective_value: float
    iterations_run: int


@dataclass(frozen=True)
class BinnedDistribution:
    """Adjacent score columns merged until each bin holds enough candidates."""

    g: np.ndarray  # programs x bins
    program_ids: tuple[str, ...]
    ranges: tuple[tuple[int, int], ...]  # inclusive (low, high) score per bin
    counts: np.ndarray  # candidates per bin


DistLike = Union[ScoreDistribution, BinnedDistribution]


def _columns(dist: DistLike) -> tuple[np.ndarray, np.ndarray]:
    """g restricted to populated columns, ascending in score."""
    if isinstance(dist, BinnedDistribution):
        keep = dist.counts > 0
        return dist.g[:, keep], dist.counts[keep]
    keep = dist.valid_columns
    return dist.g[:, keep], dist.candidates_per_score[keep]


def _aligned_features(dist: DistLike, features: FeatureMatrix) -> np.ndarray:
    missing = sorted(set(dist.program_ids) - set(features.program_ids))
    if missing:
        raise ValueError(f"feature matrix lacks rows for programs: {missing}")
    row_of = {pid: k for k, pid in enumerate(features.program_ids)}
    return features.x[[row_of[pid] for pid in dist.program_ids]]


def _term_matrix(dist: DistLike, features: FeatureMatrix) -> np.ndarray:
    """One row per adjacent score pair: the linear coefficients of that term.

    Term k of the objective is ``max{beta . d_k, 0}`` with
    ``d_k = X^T (g[:, k] - g[:, k+1])`` over ascending populated columns.
    """
    x = _aligned_features(dist, features)
    g, _ = _columns(dist)
    if g.shape[1] < 2:
        return np.zeros((0, x.shape[1]))
    return (g[:, :-1] - g[:, 1:]).T @ x


def objective(beta: np.ndarray, dist: DistLike, features: FeatureMatrix) -> float:
    """Total positive part of the wrong-way moves; >= 0, convex in beta."""
    beta = _check_beta(beta, features)
    terms = _term_matrix(dist, features) @ beta
    return float(np.clip(terms, 0.0, None).sum())


def subgradient(beta: np.ndarray, dist: DistLike, features: FeatureMatrix) -> np.ndarray:
    """A subgradient of the objective: active terms' coefficients summed.

    Terms sitting exactly at a kink (argument zero) contribute nothing, a
    valid element of the subdifferential.
    """
    beta = _check_beta(beta, features)
    d = _term_matrix(dist, features)
    active = d @ beta > 0.0
    return d[active].sum(axis=0) if active.any() else np.zeros(features.n_features)


def _check_beta(beta, features: FeatureMatrix) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (features.n_features,):
        raise ValueError(f"beta must have shape ({features.n_features},), got {beta.shape}")
    return beta


def default_box(n_features: int) -> np.ndarray:
    return np.array([[-1.0, 1.0]] * n_features)


def fit(
    dist: DistLike,
    features: FeatureMatrix,
    box: np.ndarray | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    step_scale: float = DEFAULT_STEP_SCALE,
    start: np.ndarray | None = None,
) -> BetaModel:
    """Projected subgradient descent with steps ``step_scale / sqrt(k)``.

    Deterministic given its inputs. Starts from the box's upper corner unless
    told otherwise (the all-zero coefficient vector is trivially optimal and
    useless for ranking, so the default start leans positive). Projection
    clamps per coordinate; the best iterate seen is returned, and running
    longer can only improve it.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    box = default_box(features.n_features) if box is None else np.asarray(box, dtype=float)
    if box.shape != (features.n_features, 2) or (box[:, 0] > box[:, 1]).any():
        raise ValueError("box must be (n_features, 2) with lo <= hi")
    d = _term_matrix(dist, features)

    def value(b: np.ndarray) -> float:
        return float(np.clip(d @ b, 0.0, None).sum())

    beta = np.clip(box[:, 1] if start is None else np.asarray(start, dtype=float), box[:, 0], box[:, 1])
    best_beta = beta.copy()
    best_value = value(beta)
    iterations = 0
    for k in range(1, max_iters + 1):
        iterations = k
        active = d @ beta > 0.0
        grad = d[active].sum(axis=0) if active.any() else None
        if grad is None:
            break  # zero subgradient: beta already minimizes the convex objective
        moved = np.clip(beta - (step_scale / math.sqrt(k)) * grad, box[:, 0], box[:, 1])
        if np.array_equal(moved, beta):
            break  # projection pinned every coordinate; later (smaller) steps cannot unpin
        beta = moved
        v = value(beta)
        if v < best_value:
            best_value = v
            best_beta = beta.copy()
    return BetaModel(
        beta=best_beta, box=box, objective_value=value(best_beta), iterations_run=iterations
    )


def bin_scores(dist: ScoreDistribution, min_bin_count: int) -> BinnedDistribution:
    """Greedy left-to-right merge until each bin holds ``min_bin_count``
    candidates (the trailing bin may fall short). Columns merge as
    candidate-weighted averages of g."""
    if min_bin_count < 1:
        raise ValueError("min_bin_count must be >= 1")
    counts = dist.candidates_per_score
    scores = dist.scores
    groups: list[list[int]] = []
    current: list[int] = []
    for t in range(len(scores)):
        current.append(t)
        if counts[current].sum() >= min_bin_count:
            groups.append(current)
            current = []
    if current:
        groups.append(current)

    g_cols = []
    ranges = []
    totals = []
    for cols in groups:
        weight = counts[cols].astype(float)
        total = weight.sum()
        if total > 0:
            g_cols.append(dist.g[:, cols] @ (weight / total))
        else:
            g_cols.append(np.zeros(dist.g.shape[0]))
        ranges.append((int(scores[cols[0]]), int(scores[cols[-1]])))
        totals.append(int(total))
    return BinnedDistribution(
        g=np.column_stack(g_cols) if g_cols else np.zeros((dist.g.shape[0], 0)),
        program_ids=dist.program_ids,
        ranges=tuple(ranges),
        counts=np.asarray(totals, dtype=np.int64),
    )


def rank_by_beta(model: BetaModel, features: FeatureMatrix) -> Ranking:
    """Programs by ``beta . x_c`` descending, ties grouped."""
    values = features.x @ model.beta
    return Ranking.from_scores(RankingMethod.BETA, zip(features.program_ids, values))


def load_features_csv(path) -> FeatureMatrix:
    """Read ``program_id,<feature_1>,...,<feature_n>``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    if not rows:
        raise ValueError(f"no feature rows in {path}")
    names = [c for c in rows[0] if c != "program_id"]
    if not names:
        raise ValueError("feature CSV needs at least one feature column")
    ids = tuple(r["program_id"] for r in rows)
    x = np.array([[float(r[name]) for name in names] for r in rows])
    return FeatureMatrix(x=x, feature_names=tuple(names), program_ids=ids)


def write_model_json(model: BetaModel, path) -> None:
    doc = {
        "beta": [float(b) for b in model.beta],
        "box": [[float(lo), float(hi)] for lo, hi in model.box],
        "objective_value": model.objective_value,
        "iterations_run": model.iterations_run,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_model_json(path) -> BetaModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return BetaModel(
        beta=np.asarray(doc["beta"], dtype=float),
        box=np.asarray(doc["box"], dtype=float),
        objective_value=float(doc["objective_value"]),
        iterations_run=int(doc["iterations_run"]),
    )
