import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metric_freedom.distance import DistanceMatrix
from metric_freedom.errors import (
    CeilingBaseline,
    ConstantSeries,
    InputError,
    KeyMismatch,
    WeightSum,
)
from metric_freedom.lift import (
    LIFT_FIELDS,
    build_lift_table,
    headroom_normalized_lift,
    lift_table_csv,
    load_lift_inputs,
    pearson_r,
    permutation_p,
    product_freedom_check,
)


def test_headroom():
    assert headroom_normalized_lift(0.615, 0.897) == pytest.approx(0.7325, abs=1e-4)
    assert headroom_normalized_lift(0.871, 0.968) == pytest.approx(0.752, abs=1e-3)
    assert headroom_normalized_lift(0.4, 0.4) == 0.0
    assert headroom_normalized_lift(0.0, 0.3) == pytest.approx(0.3)
    with pytest.raises(CeilingBaseline):
        headroom_normalized_lift(1.0, 1.0)


def test_pearson():
    xs = [0.1, 0.5, 0.2, 0.9, 0.4]
    assert pearson_r(xs, [2 * x + 1 for x in xs]) == pytest.approx(1.0)
    assert pearson_r(xs, [-x for x in xs]) == pytest.approx(-1.0)
    with pytest.raises(ConstantSeries):
        pearson_r([1, 1, 1], [1, 2, 3])


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=20), st.floats(0.1, 5), st.floats(-5, 5))
def test_pearson_affine_invariant(ys, a, b):
    xs = list(range(len(ys)))
    if max(ys) - min(ys) < 1e-6:
        return
    assert pearson_r(xs, [a * y + b for y in ys]) == pytest.approx(pearson_r(xs, ys), abs=1e-9)


def test_permutation_p():
    xs = np.arange(10.0)
    p = permutation_p(xs, 3 * xs, n_perm=999, seed=1)
    assert p <= 0.002
    assert p == permutation_p(xs, 3 * xs, n_perm=999, seed=1)
    rng = np.random.default_rng(0)
    noise = permutation_p(rng.random(30), rng.random(30), n_perm=999, seed=2)
    assert noise > 0.05
    with pytest.raises(ValueError):
        permutation_p(xs, xs, n_perm=100)


def test_build_table():
    key_a, key_b = ("CE", "Textbook", "MSA"), ("CD", "AutoMPG", "F1")
    rows = build_lift_table(
        {key_a: (0.0, 0.0), key_b: (0.41, 0.24)},
        {key_a: 0.615, key_b: 0.670},
        {key_a: 0.615 + 0.282, key_b: 0.670 - 0.04},
    )
    assert [r.key for r in rows] == [key_a, key_b]
    assert rows[0].lift_norm == pytest.approx(0.733, abs=1e-3)
    assert rows[1].lift_norm == pytest.approx(-0.121, abs=1e-3)
    for r in rows:
        assert abs(r.lift_norm - r.lift / (1 - r.baseline)) < 1e-9
    assert build_lift_table({}, {}, {}) == []
    with pytest.raises(KeyMismatch, match="AutoMPG"):
        build_lift_table({key_a: 0.0, key_b: 0.4}, {key_a: 0.5}, {key_a: 0.6})


def test_csv_columns(fixtures):
    rows = load_lift_inputs(fixtures / "published_lift_rows.json")
    assert lift_table_csv(rows).splitlines()[0] == ",".join(LIFT_FIELDS)


def test_loader_errors(tmp_path):
    p = tmp_path / "t.json"
    p.write_text("{")
    with pytest.raises(InputError):
        load_lift_inputs(p)
    p.write_text(json.dumps([{"task": "a", "dataset": "b", "metric": "c", "F": 0.1}]))
    with pytest.raises(InputError):
        load_lift_inputs(p)


def _line_behavior(n=12):
    x = np.linspace(0, 1, n)
    return x, DistanceMatrix(np.abs(x[:, None] - x[None, :]))


def test_product_identity():
    x, d = _line_behavior()
    s = x**2
    one = product_freedom_check([s], [1.0], d)
    assert one.F_combined == one.F_individual[0]
    two = product_freedom_check([s, s], [0.5, 0.5], d)
    assert two.F_combined == two.F_individual[0]


def test_product_concordant():
    x, d = _line_behavior()
    res = product_freedom_check([x, x**2], [0.5, 0.5], d)
    assert res.bound_satisfied


def test_weight_sum():
    x, d = _line_behavior()
    with pytest.raises(WeightSum):
        product_freedom_check([x, x], [0.5, 0.6], d)
