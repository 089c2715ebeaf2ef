"""Headroom-normalized lift, the F-vs-lift correlation and the product-metric check."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .distance import DistanceMatrix, score_matrix
from .errors import (
    CeilingBaseline,
    ConstantSeries,
    InputError,
    KeyMismatch,
    NTooSmall,
    WeightSum,
)
from .freedom import FreedomEstimate, metric_freedom

Key = tuple[str, str, str]  # (task, dataset, metric)

LIFT_FIELDS = ("task", "dataset", "metric", "F", "sigma_F", "baseline", "lift", "lift_norm")


@dataclass(frozen=True)
class LiftRow:
    task: str
    dataset: str
    metric: str
    F: float
    sigma_F: float
    baseline: float
    lift: float
    lift_norm: float

    @property
    def key(self) -> Key:
        return (self.task, self.dataset, self.metric)

    def to_json(self) -> dict:
        return asdict(self)


def headroom_normalized_lift(baseline: float, skilled: float) -> float:
    """(skilled - baseline) / (1 - baseline)."""
    if baseline >= 1.0 - 1e-12:
        raise CeilingBaseline(f"baseline {baseline} leaves no headroom")
    if baseline < 0:
        raise InputError(f"baseline {baseline} < 0")
    return (skilled - baseline) / (1.0 - baseline)


def _series(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size < 3:
        raise NTooSmall(f"correlation needs at least 3 points, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantSeries("correlation is undefined for a constant series")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    a, b = x - x.mean(), y - y.mean()
    r = float(np.dot(a, b)) / math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    return min(1.0, max(-1.0, r))


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    return _pearson(*_series(xs, ys))


def permutation_p(xs, ys, n_perm: int = 9999, seed: int = 42) -> float:
    """Two-sided permutation p-value for Pearson r, shuffling ``ys``."""
    if n_perm < 999:
        raise ValueError("n_perm must be >= 999")
    x, y = _series(xs, ys)
    r_obs = abs(_pearson(x, y))
    rng = np.random.default_rng(seed)
    a = x - x.mean()
    b = y - y.mean()
    norm = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    # centered sums are permutation invariant, so only the dot product changes
    perms = np.array([rng.permutation(b) for _ in range(n_perm)])
    r_perm = np.abs(perms @ a) / norm
    hits = int(np.count_nonzero(r_perm >= r_obs - 1e-12))
    return (1 + hits) / (n_perm + 1)


def least_squares_line(xs, ys) -> tuple[float, float]:
    """(slope, intercept) of the ordinary least-squares fit."""
    x, y = _series(xs, ys)
    a = x - x.mean()
    slope = float(np.dot(a, y - y.mean()) / np.dot(a, a))
    return slope, float(y.mean() - slope * x.mean())


def _freedom_pair(v) -> tuple[float, float]:
    if isinstance(v, FreedomEstimate):
        return v.F, v.sigma_F if v.sigma_F is not None else 0.0
    if isinstance(v, (int, float)):
        return float(v), 0.0
    F, sigma = v
    return float(F), float(sigma)


def build_lift_table(
    freedom_estimates: Mapping[Key, object],
    baseline_scores: Mapping[Key, float],
    skilled_scores: Mapping[Key, float],
) -> list[LiftRow]:
    """Join the three inputs by (task, dataset, metric) and sort by F.

    ``freedom_estimates`` values may be a FreedomEstimate, a bare F, or (F, sigma_F).
    lift_norm is always recomputed.
    """
    keys = set(freedom_estimates)
    if keys != set(baseline_scores) or keys != set(skilled_scores):
        everything = keys | set(baseline_scores) | set(skilled_scores)
        common = keys & set(baseline_scores) & set(skilled_scores)
        missing = sorted(everything - common)
        raise KeyMismatch(f"unmatched (task, dataset, metric) keys: {missing}", keys=missing)
    rows = []
    for key in keys:
        F, sigma = _freedom_pair(freedom_estimates[key])
        base, skilled = float(baseline_scores[key]), float(skilled_scores[key])
        rows.append(
            LiftRow(*key, F=F, sigma_F=sigma, baseline=base, lift=skilled - base,
                    lift_norm=headroom_normalized_lift(base, skilled))
        )
    rows.sort(key=lambda r: (r.F, r.key))
    return rows


def load_lift_inputs(path: str | Path) -> list[LiftRow]:
    """Read a JSON list of rows carrying F, baseline and either ``skilled`` or ``lift``."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from None
    if isinstance(raw, dict):
        raw = raw.get("rows")
    if not isinstance(raw, list):
        raise InputError(f"{path}: expected a list of rows")
    fe, base, skilled = {}, {}, {}
    for i, obj in enumerate(raw):
        try:
            key = (str(obj["task"]), str(obj["dataset"]), str(obj["metric"]))
            b = float(obj["baseline"])
            s = float(obj["skilled"]) if "skilled" in obj else b + float(obj["lift"])
            f = (float(obj["F"]), float(obj.get("sigma_F", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: row {i}: bad or missing field ({exc})") from None
        if key in base:
            raise InputError(f"{path}: row {i}: duplicate key {key}")
        fe[key], base[key], skilled[key] = f, b, s
    return build_lift_table(fe, base, skilled)


def lift_table_csv(rows: Sequence[LiftRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LIFT_FIELDS)
    for r in rows:
        w.writerow([r.task, r.dataset, r.metric] + [f"{getattr(r, f):.10g}" for f in LIFT_FIELDS[3:]])
    return buf.getvalue()


def lift_table_json(rows: Sequence[LiftRow]) -> list[dict]:
    return [r.to_json() for r in rows]


@dataclass(frozen=True)
class ProductCheck:
    F_combined: float
    F_individual: tuple[float, ...]
    bound_satisfied: bool


def product_freedom_check(
    per_metric_scores: Sequence[Sequence[float]],
    weights: Sequence[float],
    d_beh: DistanceMatrix,
    slack: float = 0.05,
) -> ProductCheck:
    """F of the weighted score sum against F of each component, same behavior matrix."""
    if len(per_metric_scores) != len(weights) or not weights:
        raise InputError("need one weight per score list")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise WeightSum(f"weights must be >= 0 and sum to 1, got sum {float(w.sum())!r}")
    S = np.asarray(per_metric_scores, dtype=float)
    n = np.shape(d_beh)[0]
    if S.shape[1] != n:
        raise InputError(f"score lists have length {S.shape[1]}, behavior matrix has n = {n}")
    F_k = tuple(metric_freedom(d_beh, score_matrix(s)).F for s in S)
    combined = w @ S if len(w) > 1 else S[0]
    F_c = metric_freedom(d_beh, score_matrix(combined)).F
    return ProductCheck(F_c, F_k, F_c <= min(F_k) + slack)
