import numpy as np
import pytest

from metric_freedom.errors import CalibrationFailed, ConfigError
from metric_freedom.simlab import (
    Classification,
    IteratorConfig,
    LandscapeConfig,
    calibrate_beta,
    classify,
    greedy_fix_step,
    landscape_freedom,
    score_beta,
    scrambler_g,
    simulate_iterator,
    simulate_landscape,
)


def test_scrambler():
    k = 8
    assert scrambler_g(0.0, k) == 0.0
    assert scrambler_g(1 / (2 * k), k) == pytest.approx(1 / (2 * k))
    rng = np.random.default_rng(0)
    x, y = rng.random(10_000), rng.random(10_000)
    assert np.all(np.abs(scrambler_g(x, k) - scrambler_g(y, k)) <= np.abs(x - y) + 1e-15)
    xs = rng.random(100) * (1 - 1 / k)
    assert np.allclose(scrambler_g(xs, k), scrambler_g(xs + 1 / k, k))


def test_score_beta():
    cfg = LandscapeConfig(L0=1.0, beta=1.0, k=16)
    x = np.linspace(0, 1, 11)
    assert np.array_equal(score_beta(x, cfg), x)
    low = LandscapeConfig(L0=1.0, beta=1e-9, k=4)
    assert score_beta(0.25, low) == pytest.approx(0.0, abs=1e-8)
    rng = np.random.default_rng(1)
    a, b = rng.random(5000), rng.random(5000)
    c2 = LandscapeConfig(L0=2.0, beta=0.3, k=32)
    assert np.all(np.abs(score_beta(a, c2) - score_beta(b, c2)) <= 2.0 * np.abs(a - b) + 1e-12)


def test_freedom_zero_at_top():
    assert landscape_freedom(LandscapeConfig(beta=1.0, n_runs=50)).F == 0.0


def test_freedom_monotone_in_beta():
    betas = np.linspace(0.005, 1.0, 10)
    Fs = [landscape_freedom(LandscapeConfig(beta=b, n_runs=500)).F for b in betas]
    assert all(Fs[i + 1] <= Fs[i] + 0.05 for i in range(len(Fs) - 1))


def test_calibrate():
    cfg = LandscapeConfig(k=64, n_runs=200)
    assert calibrate_beta(0.0, cfg).beta == 1.0
    cal = calibrate_beta(0.5, cfg)
    assert 0 < cal.beta < 1 and 0.45 <= cal.F <= 0.55
    with pytest.raises(CalibrationFailed):
        calibrate_beta(0.5, cfg, tol=1e-9, max_steps=5)


def test_landscape_linear_case():
    r = simulate_landscape(LandscapeConfig(beta=1.0, W=0.2, n_eval=20_000))
    assert r.lift_hat == pytest.approx(0.2, abs=0.01)
    assert r.within_bounds


def test_landscape_config():
    with pytest.raises(ConfigError):
        LandscapeConfig(W=0.0)
    with pytest.raises(ConfigError):
        LandscapeConfig(beta=2.0)


def test_step_no_collateral():
    cfg = IteratorConfig(n_population=5, lam=0.0, gamma=0.1)
    s = np.array([0.2, 0.5, 0.6, 0.7, 0.9])
    out = greedy_fix_step(s, cfg, np.random.default_rng(0))
    assert out.mean() == pytest.approx(s.mean() + 0.1 / 5)


def test_step_collateral_expectation():
    # expected change: gamma/n - lam * rho * E[delta] * (n-1)/n
    cfg = IteratorConfig(n_population=10, lam=1.0, rho=1.0, gamma=0.01, D_max=0.2)
    rng = np.random.default_rng(1)
    s = np.full(10, 0.5)
    s[0] = 0.4
    diffs = [greedy_fix_step(s, cfg, rng).mean() - s.mean() for _ in range(200)]
    assert np.mean(diffs) < 0
    assert np.mean(diffs) == pytest.approx(0.001 - 0.09, abs=0.01)


def test_step_without_gain_never_increases():
    cfg = IteratorConfig(n_population=6, lam=0.5, gamma=1e-12)
    rng = np.random.default_rng(2)
    s = rng.random(6)
    assert greedy_fix_step(s, cfg, rng).mean() <= s.mean() + 1e-12


def test_iterator_lambda_zero_converges():
    for seed in range(10):
        tr = simulate_iterator(IteratorConfig(lam=0.0, seed=seed))
        assert tr.classification is Classification.CONVERGED
        assert all(b >= a for a, b in zip(tr.scores, tr.scores[1:]))


def test_iterator_T_zero():
    tr = simulate_iterator(IteratorConfig(T=0))
    assert len(tr.scores) == 1 and tr.classification is Classification.BUDGET


def test_iterator_deterministic():
    cfg = IteratorConfig(lam=0.3, seed=9)
    assert simulate_iterator(cfg) == simulate_iterator(cfg)


def test_classify():
    assert classify([0.1, 0.2, 0.15]) == (Classification.OSCILLATED, 2)
    assert classify([0.5, 0.96]) == (Classification.CONVERGED, None)
    assert classify([0.5, 0.6, 0.6, 0.6, 0.6]) == (Classification.PLATEAU, None)
    assert classify([0.5, 0.6, 0.7]) == (Classification.BUDGET, None)
