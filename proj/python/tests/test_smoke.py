import math
import pathlib

import numpy as np
import pytest

import dtrade

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def test_transport_two_by_two():
    w = np.array([[1.0, 0.01], [0.01, 1.0]])
    X, obj = dtrade.solve_transport(np.array([10.0, 5.0]), np.array([12.0, 3.0]), w)
    np.testing.assert_array_equal(X, [[10.0, 0.0], [2.0, 3.0]])
    assert obj == pytest.approx(10 + 0.02 + 3)
    _, greedy = dtrade.greedy_allocate(np.array([10.0, 5.0]), np.array([12.0, 3.0]), w)
    assert greedy <= obj + 1e-9


def test_share_interval():
    mean, lo, hi = dtrade.share_interval([0.5, 0.6, 0.7])
    assert mean == pytest.approx(0.6)
    assert lo == pytest.approx(0.4868, abs=5e-4)
    assert hi == pytest.approx(0.7132, abs=5e-4)


def test_analytics():
    assert dtrade.cagr(411e9, 1.02e12, 5) == pytest.approx(0.1994, abs=1e-3)
    assert dtrade.shannon_entropy([1, 1, 1, 1]) == pytest.approx(math.log(4))
    assert dtrade.top_share([80, 10, 5, 5]) == (1, 0.25)
    assert dtrade.decoupling_index(100, 110, 10, 9.5) == pytest.approx(1.5)
    star = np.zeros((4, 4))
    star[0, 1:] = star[1:, 0] = 2.0
    c = dtrade.eigenvector_centrality(star)
    assert c[0] == pytest.approx(0.5)
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    r = dtrade.ols_robust(np.array([1, 2, 2, 4, 4.0]), X)
    np.testing.assert_allclose(r["coefficients"], [1.0, 0.8])


def test_complexity():
    M = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 0]], dtype=float)
    T = dtrade.mtilde(M)
    np.testing.assert_allclose(T[0], [11 / 18, 5 / 18, 1 / 9], atol=1e-12)
    s = dtrade.eci_pci(np.array([[9, 4, 3, 2, 1, 1], [6, 5, 0, 2, 0, 1], [3, 0, 4, 0, 1, 0],
                                 [1, 2, 0, 0, 0, 5], [2, 0, 1, 6, 3, 0]], dtype=float))
    assert len(s["eci"]) == 5
    assert s["map_gap"] <= 1e-8
    with pytest.raises(dtrade.Error, match="degenerate spectrum"):
        dtrade.eci_pci(np.eye(3))


def test_boosting_and_importance():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 4))
    y = 3 * X[:, 2] + 0.1 * rng.normal(size=400)
    model = dtrade.fit_ensemble(X, y, dtrade.HyperParams(n_cycles=60))
    mse = model.training_mse
    assert all(b <= a for a, b in zip(mse, mse[1:]))
    scores = [dtrade.permutation_importance(model, X, y, j) for j in range(4)]
    assert int(np.argmax(scores)) == 2


def test_harmonize():
    out = dtrade.harmonize([("B1", "AAA", 2021, 2.0), ("B1", "BBB", 2021, 3.0), ("B1", "CCC", 2021, 0.0)],
                           {"B1": 10.0}, 2021)
    values = {c: v for _, c, _, v in out}
    assert values == pytest.approx({"AAA": 4.0, "BBB": 6.0, "CCC": 0.0})


def test_synth_and_pipeline(tmp_path):
    ds = dtrade.synth_world(seed=3, countries=5, firms=4, brands=6, sectors=2)
    assert dtrade.validate(ds) == []
    assert len(ds.countries) == 5
    manifest = dtrade.run_pipeline(str(FIXTURES / "two_country.ini"), out=str(tmp_path))
    assert "flows.csv" in manifest["outputs"]
    assert manifest["stages"] == dtrade.stage_names()
    again = dtrade.run_pipeline(str(FIXTURES / "two_country.ini"), out=str(tmp_path / "b"))
    assert again["outputs"] == manifest["outputs"]


def test_missing_stage_raises(tmp_path):
    with pytest.raises(dtrade.Error, match="run allocate first"):
        dtrade.run_pipeline(str(FIXTURES / "two_country.ini"), stages=["analyze"], out=str(tmp_path))
