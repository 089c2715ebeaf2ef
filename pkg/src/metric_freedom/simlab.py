"""Synthetic checks for the theory.

Two instruments live here. The extremal landscape ``s_beta`` tunes F through
beta and lets the lift bounds be measured. The greedy-fix iterator shows the
sharp-landscape oscillation and the flat-landscape monotone convergence.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .distance import DistanceMatrix, score_matrix
from .errors import CalibrationFailed, ConfigError
from .freedom import metric_freedom
from .theory import (
    BoundForm,
    BoundInputs,
    delta_n_envelope,
    lift_upper_bound,
    wasserstein_1d,
)

BOUND_TOL = 0.02
EPSILON = 1e-6
SUFFICIENCY = 0.95


def scrambler_g(x, k: int):
    """Distance from x to the nearest multiple of 1/k (1-Lipschitz, period 1/k)."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    x = np.asarray(x, dtype=float)
    g = np.abs(x - np.round(x * k) / k)
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class LandscapeConfig:
    L0: float = 1.0
    beta: float = 1.0
    k: int = 64
    W: float = 0.2
    n_runs: int = 200
    n_eval: int = 50_000
    seed: int = 42
    literal_supports: bool = False  # U[0,1/2] vs U[1/2,1/2+W] instead of equal widths
    delta_n: float | None = None  # None: use the envelope at n_runs

    def __post_init__(self):
        if self.L0 <= 0:
            raise ConfigError("L0 must be > 0")
        if not 0 < self.beta <= self.L0:
            raise ConfigError("beta must be in (0, L0]")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0 < self.W <= 0.5:
            raise ConfigError("W must be in (0, 1/2]")
        if self.n_runs < 3:
            raise ConfigError("n_runs must be >= 3")
        if self.n_eval < 1:
            raise ConfigError("n_eval must be >= 1")

    def min_k(self) -> int:
        """Smallest k satisfying k >= 4 L0 / (beta W^2)."""
        return math.ceil(4.0 * self.L0 / (self.beta * self.W**2) - 1e-9)


def score_beta(x, cfg: LandscapeConfig):
    """s_beta(x) = beta x + (L0 - beta) g(x)."""
    x = np.asarray(x, dtype=float)
    s = cfg.beta * x + (cfg.L0 - cfg.beta) * scrambler_g(x, cfg.k)
    return float(s) if s.ndim == 0 else s


def _positions(cfg: LandscapeConfig) -> np.ndarray:
    return np.random.default_rng([cfg.seed, 0]).random(cfg.n_runs)


def landscape_freedom(cfg: LandscapeConfig, x: np.ndarray | None = None):
    """F of s_beta on base samples, behavior distance |x_i - x_j|."""
    x = _positions(cfg) if x is None else x
    d_beh = DistanceMatrix(np.abs(x[:, None] - x[None, :]))
    return metric_freedom(d_beh, score_matrix(score_beta(x, cfg)))


@dataclass(frozen=True)
class Calibration:
    beta: float
    F: float
    steps: int


def calibrate_beta(
    target_F: float, cfg: LandscapeConfig, tol: float = 0.02, max_steps: int = 60
) -> Calibration:
    """Bisection on beta in (0, L0] until the measured F is within ``tol`` of target.

    The same base positions are reused at every beta so F(beta) is a
    deterministic function and bisection is well posed.
    """
    if not 0 <= target_F < 1:
        raise ConfigError("target_F must be in [0, 1)")
    x = _positions(cfg)

    def F_at(beta):
        return landscape_freedom(replace(cfg, beta=beta), x).F

    f_top = F_at(cfg.L0)
    if abs(f_top - target_F) <= tol:
        return Calibration(cfg.L0, f_top, 0)
    lo, hi = 0.0, cfg.L0
    for step in range(1, max_steps + 1):
        mid = 0.5 * (lo + hi)
        f = F_at(mid)
        if abs(f - target_F) <= tol:
            return Calibration(mid, f, step)
        if f > target_F:
            lo = mid
        else:
            hi = mid
    raise CalibrationFailed(
        f"no beta reached F = {target_F} +/- {tol} in {max_steps} steps "
        f"(last F = {f:.4f} at beta = {mid:.6g}); raise n_runs or tol",
        target_F=target_F,
    )


@dataclass(frozen=True)
class LandscapeResult:
    beta: float
    k: int
    F_hat: float
    lift_hat: float
    W1_hat: float
    lower_bound: float
    upper_bound_appendix: float
    within_bounds: bool
    tol: float = BOUND_TOL

    def row(self) -> dict:
        return {k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in self.__dict__.items()}


def _supports(cfg: LandscapeConfig):
    if cfg.literal_supports:
        return (0.0, 0.5), (0.5, 0.5 + cfg.W)
    w = 0.5 - cfg.W
    return (0.0, w), (cfg.W, w + cfg.W)


def simulate_landscape(cfg: LandscapeConfig, tol: float = BOUND_TOL) -> LandscapeResult:
    est = landscape_freedom(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    (a0, b0), (a1, b1) = _supports(cfg)
    p0 = rng.uniform(a0, b0, cfg.n_eval)
    p1 = rng.uniform(a1, b1, cfg.n_eval)
    lift = float(np.mean(score_beta(p1, cfg)) - np.mean(score_beta(p0, cfg)))
    w1 = wasserstein_1d(p0, p1)
    lower = cfg.L0 / 4.0 * (1.0 - est.F) * w1
    delta = cfg.delta_n
    if delta is None:
        delta = delta_n_envelope(min(1.0, abs(est.r_M)), cfg.n_runs)
    upper = lift_upper_bound(
        BoundInputs(cfg.L0, 1.0, min(2.0, max(0.0, est.F)), delta, w1), BoundForm.APPENDIX_STAGE4
    )
    ok = lower - tol <= lift <= upper + tol
    return LandscapeResult(cfg.beta, cfg.k, est.F, lift, w1, lower, upper, ok, tol)


def landscape_grid(
    targets: Sequence[float], cfg: LandscapeConfig, enforce_min_k: bool = True
) -> list[tuple[float, Calibration, LandscapeResult]]:
    """Calibrate beta for each target at ``cfg.k``, then evaluate.

    With ``enforce_min_k`` the evaluation uses k = max(cfg.k, 4 L0/(beta W^2));
    F_hat is re-measured at that k, it is not carried over from calibration.
    """
    out = []
    for t in targets:
        cal = calibrate_beta(t, cfg)
        run_cfg = replace(cfg, beta=cal.beta)
        if enforce_min_k:
            run_cfg = replace(run_cfg, k=max(cfg.k, run_cfg.min_k()))
        out.append((t, cal, simulate_landscape(run_cfg)))
    return out


def landscape_csv(grid) -> str:
    buf = io.StringIO()
    cols = ["target_F", "beta", "k", "F_hat", "lift_hat", "W1_hat",
            "lower_bound", "upper_bound_appendix", "within_bounds"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for t, _, r in grid:
        w.writerow([f"{t:.10g}", f"{r.beta:.10g}", r.k, f"{r.F_hat:.10g}", f"{r.lift_hat:.10g}",
                    f"{r.W1_hat:.10g}", f"{r.lower_bound:.10g}",
                    f"{r.upper_bound_appendix:.10g}", str(r.within_bounds).lower()])
    return buf.getvalue()


class Classification(enum.Enum):
    CONVERGED = "CONVERGED"
    OSCILLATED = "OSCILLATED"
    PLATEAU = "PLATEAU"
    BUDGET = "BUDGET"


@dataclass(frozen=True)
class IteratorConfig:
    n_population: int = 10
    initial: tuple = ("uniform", 0.0, 1.0)
    lam: float = 0.0
    rho: float = 0.5
    gamma: float = 0.2
    D_max: float = 0.5
    T: int = 200
    seed: int = 42
    stop_at_sufficiency: bool = True

    def __post_init__(self):
        if self.n_population < 1:
            raise ConfigError("n_population must be >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if self.gamma <= 0 or self.D_max <= 0:
            raise ConfigError("gamma and D_max must be > 0")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if self.initial[0] not in ("uniform", "beta", "constant"):
            raise ConfigError(f"unknown initial distribution {self.initial[0]!r}")

    @property
    def p_min(self) -> float:
        return 1.0 / self.n_population


def initial_population(cfg: IteratorConfig, rng) -> np.ndarray:
    kind, *args = cfg.initial
    n = cfg.n_population
    if kind == "uniform":
        lo, hi = args
        return rng.uniform(lo, hi, n)
    if kind == "beta":
        return rng.beta(args[0], args[1], n)
    return np.full(n, float(args[0]))


def greedy_fix_step(scores: np.ndarray, cfg: IteratorConfig, rng) -> np.ndarray:
    """Raise the worst element by gamma; displace each other element w.p. rho.

    A displaced element loses lam * U(0, D_max). Scores stay in [0, 1].
    """
    s = np.array(scores, dtype=float)
    if s.size == 0:
        raise ValueError("population is empty")
    worst = int(np.argmin(s))
    hit = rng.random(s.size) < cfg.rho
    hit[worst] = False
    delta = rng.uniform(0.0, cfg.D_max, s.size)
    s[hit] -= cfg.lam * delta[hit]
    s[worst] += cfg.gamma
    return np.clip(s, 0.0, 1.0)


@dataclass(frozen=True)
class Trajectory:
    scores: tuple[float, ...]
    classification: Classification
    first_decrease: int | None = None

    @property
    def S0(self) -> float:
        return self.scores[0]


def classify(S: Sequence[float], eps: float = EPSILON, sufficiency: float = SUFFICIENCY):
    """Label a mean-score series. Any drop larger than eps wins over everything else."""
    S = list(S)
    for t in range(1, len(S)):
        if S[t] < S[t - 1] - eps:
            return Classification.OSCILLATED, t
    if len(S) == 1:
        return Classification.BUDGET, None
    if S[-1] > sufficiency:
        return Classification.CONVERGED, None
    if len(S) > 3 and abs(S[-1] - S[-4]) < eps:
        return Classification.PLATEAU, None
    return Classification.BUDGET, None


def simulate_iterator(cfg: IteratorConfig) -> Trajectory:
    rng = np.random.default_rng(cfg.seed)
    pop = initial_population(cfg, rng)
    S = [float(pop.mean())]
    for _ in range(cfg.T):
        if cfg.stop_at_sufficiency and S[-1] > SUFFICIENCY:
            break
        pop = greedy_fix_step(pop, cfg, rng)
        S.append(float(pop.mean()))
    label, first = classify(S)
    return Trajectory(tuple(S), label, first)


def trajectories_csv(trajs: Sequence[Trajectory], seeds: Sequence[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "t", "S"])
    for seed, tr in zip(seeds, trajs):
        for t, s in enumerate(tr.scores):
            w.writerow([seed, t, f"{s:.10g}"])
    return buf.getvalue()


def categorical_runs(
    n_questions: int,
    n_runs: int,
    seed: int = 42,
    p_correct: tuple[float, float] = (0.3, 0.7),
    wrong: Sequence[str] = ("B", "C", "D"),
    dataset_id: str = "synthetic",
) -> list:
    """Multiple-choice style runs: answer "A" scores 1, anything else 0.

    Each question gets its own accuracy drawn from ``p_correct``; wrong answers
    are spread over ``wrong`` with decreasing weights.
    """
    from .records import OutputPayload, RunRecord

    rng = np.random.default_rng(seed)
    w = np.arange(len(wrong), 0, -1, dtype=float)
    w /= w.sum()
    out = []
    for q in range(n_questions):
        p = rng.uniform(*p_correct)
        for i in range(n_runs):
            ok = rng.random() < p
            label = "A" if ok else str(wrong[rng.choice(len(wrong), p=w)])
            out.append(RunRecord(dataset_id, f"q{q:02d}", i, OutputPayload.category(label), float(ok)))
    return out


def gaussian_copula_runs(n: int, rho: float, seed: int = 42, dataset_id: str = "copula") -> list:
    """Scalar behaviors Phi(x) and scores Phi(rho x + sqrt(1 - rho^2) z)."""
    from .records import OutputPayload, RunRecord

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    z = rng.standard_normal(n)
    y = rho * x + math.sqrt(1.0 - rho * rho) * z
    phi = np.vectorize(lambda v: 0.5 * math.erfc(-v / math.sqrt(2.0)))
    pos, score = phi(x), phi(y)
    return [
        RunRecord(dataset_id, "q0", i, OutputPayload.vector([float(pos[i])]), float(score[i]))
        for i in range(n)
    ]
