"""Metric Freedom estimator.

F = 1 - r_M, where r_M is the Spearman correlation between the upper
triangles of a behavioral distance matrix and the score distance matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .distance import (
    DistanceKind,
    DistanceMatrix,
    DistanceSpec,
    build_distance_matrix,
    score_matrix,
)
from .errors import (
    DegenerateBehavior,
    DegenerateError,
    DegenerateScores,
    MissingTrace,
    NoMixedQuestions,
    NTooSmall,
)
from .records import (
    DEFAULT_SCORE_TOLERANCE,
    QuestionGroup,
    RunRecord,
    filter_mixed_questions,
)

MIN_RUNS = 3


class Aggregation(enum.Enum):
    PER_DATASET = "dataset"
    PER_QUESTION_MEDIAN = "question-median"


@dataclass(frozen=True)
class FreedomEstimate:
    F: float
    r_M: float
    n_runs: int
    n_pairs: int
    aggregation: Aggregation = Aggregation.PER_DATASET
    sigma_F: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    questions_used: int = 0
    questions_excluded: int = 0
    bootstrap_degenerate: int = 0

    def to_json(self) -> dict:
        return {
            "F": self.F,
            "r_M": self.r_M,
            "n_runs": self.n_runs,
            "n_pairs": self.n_pairs,
            "aggregation": self.aggregation.value,
            "sigma_F": self.sigma_F,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "questions_used": self.questions_used,
            "questions_excluded": self.questions_excluded,
            "bootstrap_degenerate": self.bootstrap_degenerate,
        }


def fractional_ranks(values: Sequence[float]) -> np.ndarray:
    """Ranks 1..m; tied values share the mean of the positions they cover."""
    x = np.asarray(values, dtype=float)
    m = x.size
    if m == 0:
        raise ValueError("fractional_ranks needs a non-empty sequence")
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], m]
    avg = (starts + ends + 1) / 2.0  # mean of positions start+1 .. end
    ranks = np.empty(m)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def _centered(r: np.ndarray) -> np.ndarray:
    return r - r.mean()


def _rank_corr(rb: np.ndarray, rs: np.ndarray) -> float:
    a, b = _centered(rb), _centered(rs)
    den = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    r = float(np.dot(a, b)) / den
    return min(1.0, max(-1.0, r))


def _check_pair(d_beh: DistanceMatrix, d_score: DistanceMatrix):
    d_beh = d_beh if isinstance(d_beh, DistanceMatrix) else DistanceMatrix(d_beh)
    d_score = d_score if isinstance(d_score, DistanceMatrix) else DistanceMatrix(d_score)
    if d_beh.n != d_score.n:
        raise ValueError(f"matrix sizes differ: {d_beh.n} vs {d_score.n}")
    if d_beh.n < MIN_RUNS:
        raise NTooSmall(f"need n >= {MIN_RUNS} runs, got {d_beh.n}")
    ub, us = d_beh.upper(), d_score.upper()
    if np.all(us == us[0]):
        raise DegenerateScores("all score distances tie; F is undefined")
    if np.all(ub == ub[0]):
        raise DegenerateBehavior("all behavioral distances tie; F is undefined")
    return d_beh, d_score, ub, us


def mantel_spearman(d_beh, d_score) -> float:
    """Spearman correlation of the two upper-triangular distance vectors."""
    _, _, ub, us = _check_pair(d_beh, d_score)
    return _rank_corr(fractional_ranks(ub), fractional_ranks(us))


def metric_freedom(d_beh, d_score) -> FreedomEstimate:
    r = mantel_spearman(d_beh, d_score)
    n = np.shape(d_beh)[0]
    return FreedomEstimate(F=1.0 - r, r_M=r, n_runs=n, n_pairs=n * (n - 1) // 2)


def mantel_permutation_p(d_beh, d_score, n_perm: int = 999, seed: int = 0) -> float:
    """Two-sided Mantel p-value: rows/columns of ``d_beh`` permuted jointly."""
    if n_perm < 99:
        raise ValueError("n_perm must be >= 99")
    d_beh, d_score, ub, us = _check_pair(d_beh, d_score)
    rs = fractional_ranks(us)
    r_obs = _rank_corr(fractional_ranks(ub), rs)
    n = d_beh.n
    iu = np.triu_indices(n, 1)
    data = d_beh.data
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        p = rng.permutation(n)
        perm_upper = data[np.ix_(p, p)][iu]
        if abs(_rank_corr(fractional_ranks(perm_upper), rs)) >= abs(r_obs) - 1e-12:
            hits += 1
    return (1 + hits) / (n_perm + 1)


def _behavior_items(runs: Sequence[RunRecord], spec: DistanceSpec):
    """Items for the behavioral kernel; COSINE reads trace vectors and drops runs without one."""
    if spec.kind is DistanceKind.COSINE:
        kept = [r for r in runs if r.trace_vector is not None]
        if len(kept) < MIN_RUNS:
            raise MissingTrace(
                f"only {len(kept)} of {len(runs)} runs carry a trace_vector; need {MIN_RUNS}"
            )
        return kept, [r.trace_vector for r in kept]
    return list(runs), [r.output for r in runs]


def run_freedom(runs: Sequence[RunRecord], spec: DistanceSpec) -> FreedomEstimate:
    """F over one collection of runs (no aggregation semantics)."""
    kept, items = _behavior_items(runs, spec)
    if len(kept) < MIN_RUNS:
        raise NTooSmall(f"need n >= {MIN_RUNS} runs, got {len(kept)}")
    d_beh = build_distance_matrix(items, spec)
    d_score = score_matrix([r.score for r in kept])
    return metric_freedom(d_beh, d_score)


def per_dataset_freedom(runs: Sequence[RunRecord], spec: DistanceSpec) -> FreedomEstimate:
    """F over all runs of a single dataset."""
    datasets = {r.dataset_id for r in runs}
    if len(datasets) > 1:
        raise ValueError(f"runs span several datasets: {sorted(datasets)}")
    return run_freedom(runs, spec)


def median(values: Iterable[float]) -> float:
    xs = sorted(values)
    if not xs:
        raise ValueError("median of empty sequence")
    mid = len(xs) // 2
    if len(xs) % 2:
        return xs[mid]
    return (xs[mid - 1] + xs[mid]) / 2.0


@dataclass(frozen=True)
class QuestionFreedom:
    dataset_id: str
    question_id: str
    estimate: FreedomEstimate


def question_freedoms(
    groups: Sequence[QuestionGroup],
    spec: DistanceSpec,
    tolerance: float = DEFAULT_SCORE_TOLERANCE,
) -> tuple[list[QuestionFreedom], int]:
    """Per-question estimates over mixed questions; returns (estimates, n_excluded).

    Raises NoMixedQuestions when the mixed filter leaves nothing.
    """
    mixed = filter_mixed_questions(groups, tolerance)
    if not mixed:
        raise NoMixedQuestions(
            f"no mixed questions among {len(groups)} (questions where every run "
            "scores the same are excluded)"
        )
    excluded = len(groups) - len(mixed)
    out = []
    for g in mixed:
        try:
            est = run_freedom(g.runs, spec)
        except (DegenerateError, NTooSmall, MissingTrace):
            excluded += 1
            continue
        out.append(QuestionFreedom(g.dataset_id, g.question_id, est))
    return out, excluded


def aggregate_question_median(
    per_question: Sequence[QuestionFreedom], excluded: int = 0
) -> FreedomEstimate:
    if not per_question:
        raise DegenerateError("no mixed question produced a defined F")
    r = median(q.estimate.r_M for q in per_question)
    return FreedomEstimate(
        F=1.0 - r,
        r_M=r,
        n_runs=sum(q.estimate.n_runs for q in per_question),
        n_pairs=sum(q.estimate.n_pairs for q in per_question),
        aggregation=Aggregation.PER_QUESTION_MEDIAN,
        questions_used=len(per_question),
        questions_excluded=excluded,
    )


def per_question_freedom(
    groups: Sequence[QuestionGroup],
    spec: DistanceSpec,
    tolerance: float = DEFAULT_SCORE_TOLERANCE,
) -> FreedomEstimate:
    """Median F over mixed questions with at least three usable runs."""
    per_q, excluded = question_freedoms(groups, spec, tolerance)
    return aggregate_question_median(per_q, excluded)


def with_bootstrap(est: FreedomEstimate, sigma, lo, hi, n_degenerate) -> FreedomEstimate:
    return replace(est, sigma_F=sigma, ci_low=lo, ci_high=hi, bootstrap_degenerate=n_degenerate)
