"""Closed-form evaluators for the lift, gap, concentration and phase-transition bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AntiConcordant, ConfigError

# delta_inf <= 0.047 * rho_m for rho_m <= 0.9; C0 <= 4 for scores in [0, 1]
POP_GAP_SLOPE = 0.047
FINITE_SAMPLE_C0 = 4.0


@dataclass(frozen=True)
class BoundInputs:
    L0: float
    alpha: float
    F: float
    delta_n: float
    W1: float

    def __post_init__(self):
        if self.L0 <= 0:
            raise ConfigError("L0 must be > 0")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must be in (0, 1]")
        if not 0 <= self.F <= 2:
            raise ConfigError("F must be in [0, 2]")
        if self.delta_n < 0 or self.W1 < 0:
            raise ConfigError("delta_n and W1 must be >= 0")


@dataclass(frozen=True)
class PhaseParams:
    p_min: float
    gamma: float
    rho: float
    D_max: float
    C: float = 1.0

    def __post_init__(self):
        if not 0 < self.p_min <= 1:
            raise ConfigError("p_min must be in (0, 1]")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if self.gamma <= 0 or self.D_max <= 0 or self.C <= 0:
            raise ConfigError("gamma, D_max and C must be > 0")


class BoundForm(enum.Enum):
    THEOREM = "theorem"
    APPENDIX_STAGE4 = "appendix"


def kruskal_spearman(r: float) -> float:
    """Population Spearman correlation of a bivariate normal with Pearson r."""
    if not -1 <= r <= 1:
        raise ValueError("r must be in [-1, 1]")
    return 6.0 / math.pi * math.asin(r / 2.0)


def gaussian_gap(r: float) -> float:
    """|r| - (6/pi) asin(|r|/2): maximal minus rank correlation under a Gaussian copula."""
    a = abs(r)
    if a > 1:
        raise ValueError("r must be in [-1, 1]")
    return max(0.0, a - kruskal_spearman(a))


def delta_n_envelope(rho_m: float, n: int) -> float:
    if not 0 <= rho_m <= 1:
        raise ValueError("rho_m must be in [0, 1]")
    if n < 2:
        raise ValueError("n must be >= 2")
    return POP_GAP_SLOPE * rho_m + FINITE_SAMPLE_C0 / math.sqrt(n)


def lift_upper_bound(b: BoundInputs, form: BoundForm = BoundForm.THEOREM) -> float:
    """Upper bound on skill lift.

    THEOREM:  L0 (1 - F + delta_n) W1, defined only for F <= 1.
    APPENDIX: L0 (3 - 2F + 2 delta_n) W1 capped at 3 L0 W1; for F > 1 the
    rank-relaxation step does not apply and the cap itself is returned.
    """
    if form is BoundForm.THEOREM:
        if b.F > 1:
            raise AntiConcordant(
                f"F = {b.F} > 1: use the trivial Lipschitz bound L0 * W1 = {b.L0 * b.W1}"
            )
        return b.L0 * (1.0 - b.F + b.delta_n) * b.W1
    ceiling = 3.0 * b.L0 * b.W1
    if b.F > 1:
        return ceiling
    return min(b.L0 * (3.0 - 2.0 * b.F + 2.0 * b.delta_n) * b.W1, ceiling)


def wasserstein_1d(a: Sequence[float], b: Sequence[float]) -> float:
    """Empirical W1 between two samples: integral of |CDF_a - CDF_b|."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("samples must be non-empty")
    if xa.size == xb.size:
        return float(np.mean(np.abs(xa - xb)))
    grid = np.concatenate([xa, xb])
    grid.sort(kind="mergesort")
    widths = np.diff(grid)
    left = grid[:-1]
    cdf_a = np.searchsorted(xa, left, side="right") / xa.size
    cdf_b = np.searchsorted(xb, left, side="right") / xb.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * widths))


def convergence_condition(p: PhaseParams, lambda_max: float) -> bool:
    """lambda_max * rho * D_max < p_min * gamma (strict)."""
    if lambda_max < 0:
        raise ValueError("lambda_max must be >= 0")
    return lambda_max * p.rho * p.D_max < p.p_min * p.gamma


def critical_freedom(p: PhaseParams) -> float:
    """F* = 1 - p_min gamma / (C rho D_max); may be negative."""
    return 1.0 - (p.p_min * p.gamma) / (p.C * p.rho * p.D_max)


def sharpness_from_freedom(F: float, L0: float) -> float:
    """lambda_max = L0 (1 - F), floored at 0 for anti-concordant metrics."""
    return max(0.0, L0 * (1.0 - F))


def convergence_rate_envelope(S0: float, c: float, t: int) -> float:
    """(1 - S0) exp(-c t / (1 - S0))."""
    if not 0 <= S0 < 1:
        raise ValueError("S0 must be in [0, 1)")
    if c <= 0:
        raise ValueError("c must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    return (1.0 - S0) * math.exp(-c * t / (1.0 - S0))


def mcdiarmid_tail(n: int, t: float) -> float:
    """min(1, 2 exp(-n t^2 / 8))."""
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    return min(1.0, 2.0 * math.exp(-n * t * t / 8.0))
