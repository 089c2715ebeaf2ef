"""Bootstrap intervals, subsampling stability and the (M, N) budget sweep."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distance import DistanceSpec
from .errors import (
    BootstrapCollapse,
    DegenerateError,
    GridUnderfull,
    MissingTrace,
    NoMixedQuestions,
    NTooSmall,
)
from .freedom import (
    MIN_RUNS,
    Aggregation,
    FreedomEstimate,
    aggregate_question_median,
    median,
    per_dataset_freedom,
    question_freedoms,
    run_freedom,
    with_bootstrap,
)
from .records import DEFAULT_SCORE_TOLERANCE, QuestionGroup, RunRecord, group_by_question
from .theory import mcdiarmid_tail

_SKIPPABLE = (DegenerateError, NTooSmall, MissingTrace, NoMixedQuestions)


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    seed: int = 42
    ci_level: float = 0.95

    def __post_init__(self):
        if self.B < 100:
            raise ValueError("B must be >= 100")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must be in (0, 1)")


def _summarize(values: list[float], n_degenerate: int, B: int, ci_level: float):
    if n_degenerate > B / 2:
        raise BootstrapCollapse(f"{n_degenerate} of {B} bootstrap resamples were degenerate")
    arr = np.asarray(values)
    sigma = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    tail = (1.0 - ci_level) / 2.0
    lo, hi = np.quantile(arr, [tail, 1.0 - tail])
    return sigma, float(lo), float(hi)


def bootstrap_freedom(
    data: Sequence[RunRecord] | Sequence[QuestionGroup],
    spec: DistanceSpec,
    config: BootstrapConfig = BootstrapConfig(),
    tolerance: float = DEFAULT_SCORE_TOLERANCE,
) -> FreedomEstimate:
    """Point estimate plus bootstrap sigma_F and percentile CI.

    A list of runs is treated per dataset (runs resampled); a list of
    question groups per question (questions resampled, median recomputed).
    """
    rng = np.random.default_rng(config.seed)
    values: list[float] = []
    degenerate = 0
    if data and isinstance(data[0], QuestionGroup):
        per_q, excluded = question_freedoms(data, spec, tolerance)
        base = aggregate_question_median(per_q, excluded)
        r = np.array([q.estimate.r_M for q in per_q])
        for _ in range(config.B):
            idx = rng.integers(0, len(r), size=len(r))
            values.append(1.0 - median(r[idx]))
    else:
        runs = list(data)
        base = per_dataset_freedom(runs, spec)
        n = len(runs)
        for _ in range(config.B):
            idx = rng.integers(0, n, size=n)
            try:
                values.append(run_freedom([runs[i] for i in idx], spec).F)
            except _SKIPPABLE:
                degenerate += 1
    sigma, lo, hi = _summarize(values, degenerate, config.B, config.ci_level)
    return with_bootstrap(base, sigma, lo, hi, degenerate)


@dataclass(frozen=True)
class StabilityPoint:
    n: int
    mean_abs_error: float
    std: float
    mcdiarmid: float
    trials_used: int


def subsample_stability(
    runs: Sequence[RunRecord],
    spec: DistanceSpec,
    n_grid: Sequence[int],
    trials: int = 200,
    seed: int = 42,
) -> list[StabilityPoint]:
    """Mean |F_n - F_full| over random size-n subsamples drawn without replacement."""
    runs = list(runs)
    if max(n_grid) > len(runs):
        raise ValueError(f"n_grid max {max(n_grid)} exceeds {len(runs)} available runs")
    if min(n_grid) < MIN_RUNS:
        raise NTooSmall(f"every n must be >= {MIN_RUNS}")
    f_full = run_freedom(runs, spec).F
    out = []
    for n in n_grid:
        rng = np.random.default_rng([seed, n])
        errs = []
        for _ in range(trials):
            idx = rng.choice(len(runs), size=n, replace=False)
            try:
                errs.append(abs(run_freedom([runs[i] for i in sorted(idx)], spec).F - f_full))
            except _SKIPPABLE:
                continue
        if not errs:
            raise DegenerateError(f"every subsample of size {n} was degenerate")
        e = np.asarray(errs)
        mae = float(e.mean())
        out.append(
            StabilityPoint(n, mae, float(e.std()), mcdiarmid_tail(n, mae), len(errs))
        )
    return out


def loglog_fit(ns: Sequence[float], errs: Sequence[float], slope: float | None = None):
    """Least squares of log(err) on log(n). Returns (C, slope, R^2).

    With ``slope`` given only the constant is fitted (err = C * n**slope);
    R^2 is then measured against that constrained line.
    """
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(errs, float))
    if slope is None:
        b, a = np.polyfit(x, y, 1)
    else:
        b = slope
        a = float(np.mean(y - b * x))
    resid = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return math.exp(a), float(b), r2


class CellStatus(enum.Enum):
    OK = "OK"
    TOO_FEW_RUNS = "TOO_FEW_RUNS"
    DEGENERATE = "DEGENERATE"


@dataclass(frozen=True)
class SweepCell:
    M: int
    N: int
    F_hat: float | None
    cost: float
    status: CellStatus
    trial_F: tuple[float, ...] = ()

    def row(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "F_hat": "" if self.F_hat is None else f"{self.F_hat:.10g}",
            "cost": f"{self.cost:.10g}",
            "status": self.status.value,
        }


def sweep_cost(cost_per_run: float, M: int, N: int) -> float:
    # rounding keeps printed costs free of binary noise (0.17 * 36 -> 6.12)
    return round(cost_per_run * M * N, 10)


def budget_sweep(
    runs: Sequence[RunRecord] | Sequence[QuestionGroup],
    spec: DistanceSpec,
    M_list: Sequence[int],
    N_list: Sequence[int],
    cost_per_run: float,
    trials: int = 20,
    seed: int = 42,
    tolerance: float = DEFAULT_SCORE_TOLERANCE,
) -> list[SweepCell]:
    """Average per-question median F over random (question, run) subsamples.

    Each cell draws from its own substream seeded by (seed, M, N), so a cell's
    value does not depend on which other cells are requested.
    """
    groups = runs if runs and isinstance(runs[0], QuestionGroup) else group_by_question(runs)
    m_max, n_max = max(M_list), max(N_list)
    deep = [g for g in groups if len(g) >= n_max]
    if len(deep) < m_max:
        raise GridUnderfull(
            f"grid needs {m_max} questions with >= {n_max} runs; only {len(deep)} qualify"
        )
    cells = []
    for M in M_list:
        for N in N_list:
            cost = sweep_cost(cost_per_run, M, N)
            if N < MIN_RUNS:
                cells.append(SweepCell(M, N, None, cost, CellStatus.TOO_FEW_RUNS))
                continue
            rng = np.random.default_rng([seed, M, N])
            vals = []
            for _ in range(trials):
                q_idx = sorted(rng.choice(len(deep), size=M, replace=False))
                sub = []
                for qi in q_idx:
                    g = deep[qi]
                    r_idx = sorted(rng.choice(len(g), size=N, replace=False))
                    sub.append(QuestionGroup(g.dataset_id, g.question_id, tuple(g.runs[i] for i in r_idx)))
                try:
                    per_q, excl = question_freedoms(sub, spec, tolerance)
                    vals.append(aggregate_question_median(per_q, excl).F)
                except _SKIPPABLE:
                    continue
            if vals:
                cells.append(SweepCell(M, N, float(np.mean(vals)), cost, CellStatus.OK, tuple(vals)))
            else:
                cells.append(SweepCell(M, N, None, cost, CellStatus.DEGENERATE))
    return cells


def sweep_to_csv(cells: Sequence[SweepCell]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["M", "N", "F_hat", "cost", "status"], lineterminator="\n")
    w.writeheader()
    for c in cells:
        w.writerow(c.row())
    return buf.getvalue()


__all__ = [
    "Aggregation",
    "BootstrapConfig",
    "CellStatus",
    "StabilityPoint",
    "SweepCell",
    "bootstrap_freedom",
    "budget_sweep",
    "loglog_fit",
    "subsample_stability",
    "sweep_cost",
    "sweep_to_csv",
]
