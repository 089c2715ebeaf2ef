import numpy as np
import pytest

from metric_freedom.distance import DistanceKind, DistanceSpec
from metric_freedom.errors import BootstrapCollapse, DegenerateScores, GridUnderfull
from metric_freedom.records import group_by_question
from metric_freedom.resample import (
    BootstrapConfig,
    CellStatus,
    bootstrap_freedom,
    budget_sweep,
    loglog_fit,
    subsample_stability,
    sweep_cost,
    sweep_to_csv,
)
from metric_freedom.simlab import categorical_runs, gaussian_copula_runs

IND = DistanceSpec(DistanceKind.INDICATOR)
ABS = DistanceSpec(DistanceKind.ABS_SCORE)


def test_bootstrap_per_dataset_deterministic():
    runs = gaussian_copula_runs(20, 0.7, seed=1)
    a = bootstrap_freedom(runs, ABS, BootstrapConfig(B=200, seed=5))
    b = bootstrap_freedom(runs, ABS, BootstrapConfig(B=200, seed=5))
    assert a == b
    assert a.sigma_F > 0
    assert a.ci_low <= a.F <= a.ci_high


def test_bootstrap_per_question():
    groups = group_by_question(categorical_runs(8, 6, seed=3))
    est = bootstrap_freedom(groups, IND, BootstrapConfig(B=300))
    assert est.questions_used > 0
    assert est.ci_low <= est.ci_high


def test_bootstrap_collapse(monkeypatch):
    # natural resamples rarely degenerate (< e^-1 of the time), so force it
    import metric_freedom.resample as rs

    real = rs.run_freedom
    calls = {"n": 0}

    def flaky(runs, spec):
        calls["n"] += 1
        if calls["n"] % 5 < 3:
            raise DegenerateScores("forced")
        return real(runs, spec)

    runs = gaussian_copula_runs(10, 0.5, seed=0)
    monkeypatch.setattr(rs, "run_freedom", flaky)
    with pytest.raises(BootstrapCollapse):
        bootstrap_freedom(runs, ABS, BootstrapConfig(B=200))


def test_bootstrap_config():
    with pytest.raises(ValueError):
        BootstrapConfig(B=10)


def test_sweep_cost_rounding():
    assert sweep_cost(0.17, 6, 6) == 6.12
    assert f"{sweep_cost(0.17, 6, 6):.10g}" == "6.12"


def test_sweep_cells_and_csv():
    runs = categorical_runs(6, 8, seed=2)
    cells = budget_sweep(runs, IND, [2, 4], [2, 4, 8], 0.5, trials=5, seed=1)
    assert len(cells) == 6
    assert all(c.status is CellStatus.TOO_FEW_RUNS for c in cells if c.N == 2)
    text = sweep_to_csv(cells)
    assert text.splitlines()[0] == "M,N,F_hat,cost,status"
    again = budget_sweep(runs, IND, [4], [4], 0.5, trials=5, seed=1)
    assert again[0].F_hat == next(c for c in cells if (c.M, c.N) == (4, 4)).F_hat


def test_sweep_underfull():
    with pytest.raises(GridUnderfull):
        budget_sweep(categorical_runs(3, 5, seed=2), IND, [4], [3], 1.0)


def test_loglog_fit_exact():
    ns = np.array([4, 8, 16, 32])
    C, slope, r2 = loglog_fit(ns, 0.8 / np.sqrt(ns))
    assert C == pytest.approx(0.8) and slope == pytest.approx(-0.5) and r2 == pytest.approx(1.0)
    C, slope, r2 = loglog_fit(ns, 0.8 / np.sqrt(ns), slope=-0.5)
    assert C == pytest.approx(0.8) and r2 == pytest.approx(1.0)


def test_stability_shrinks():
    runs = gaussian_copula_runs(30, 0.7, seed=3)
    pts = subsample_stability(runs, ABS, [4, 10, 25], trials=50)
    errs = [p.mean_abs_error for p in pts]
    assert errs[0] > errs[1] > errs[2]
    assert all(0 <= p.mcdiarmid <= 1 for p in pts)
