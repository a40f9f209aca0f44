import numpy as np
import pytest

from covsurf import vsurf as vs
from covsurf.mixed_data import DataError

FAST = vs.VsurfParams(nfor=10, q=100, nfor_nested=3)


def _planted(seed, n=200, p=10, informative=2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (X[:, :informative].sum(axis=1) > 0).astype(int)
    return X, y


def test_vi_threshold_step_profile():
    sd = np.r_[np.full(10, 1.0), np.full(40, 0.1)]
    assert vs.vi_threshold(sd) == pytest.approx(0.1)


def test_vi_threshold_too_short_to_split():
    sd = np.array([0.5, 0.3, 0.1])
    assert vs.vi_threshold(sd) == pytest.approx(0.3)


def test_prediction_threshold_by_hand():
    errs = np.array([0.3, 0.2, 0.25, 0.22, 0.26])
    assert vs.prediction_threshold(errs, 2) == pytest.approx(0.04)
    assert vs.prediction_threshold(errs, 5) == 0.0


def test_perfect_variable_survives_noise_eliminated():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 21))
    y = (X[:, 0] > 0).astype(int)
    stats, surv = vs.threshold_step(X, y, FAST, seed=1)
    assert 0 in surv
    assert len(set(surv) - {0}) <= 2
    assert stats.order[0] == 0


def test_noisy_label_copies_all_survive():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 150)
    X = y[:, None] + 0.4 * rng.normal(size=(150, 4))
    _, surv = vs.threshold_step(X, y, FAST, seed=0)
    assert sorted(surv) == [0, 1, 2, 3]


def test_exact_copies_tie_to_lowest_index():
    # equal split scores go to the smaller column, so the last copy is never split on
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 150)
    X = np.column_stack([y + 0.0] * 4)
    stats, surv = vs.threshold_step(X, y, FAST, seed=0)
    assert stats.mean[3] == 0.0
    assert {0, 1} <= set(surv)


def test_null_problem_keeps_few_variables():
    params = vs.VsurfParams(nfor=25, q=100, nfor_nested=3)
    ok = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X, y = rng.normal(size=(200, 10)), rng.integers(0, 2, 200)
        try:
            _, surv = vs.threshold_step(X, y, params, seed)
            ok += len(surv) <= 2
        except vs.NothingSurvives:
            ok += 1
    assert ok >= 7


def test_interpretation_single_survivor():
    X, y = _planted(2)
    interp, errs = vs.interpretation_step(X, y, [0], FAST, seed=0)
    assert interp == (0,) and len(errs) == 1


def test_interpretation_recovers_planted_pair():
    hits = 0
    for seed in range(10):
        X, y = _planted(seed)
        order = [0, 1] + list(range(2, 10))
        interp, errs = vs.interpretation_step(X, y, order, FAST, seed)
        hits += interp == (0, 1)
        assert len(errs) == 10
        assert errs[len(interp) - 1] == errs.min()
    assert hits >= 8


def test_prediction_drops_duplicate():
    rng = np.random.default_rng(3)
    x = rng.normal(size=200)
    X = np.column_stack([x, x, rng.normal(size=200)])
    y = (x > 0).astype(int)
    pred, _ = vs.prediction_step(X, y, [0, 1], None, FAST, seed=0)
    assert pred == (0,)


def test_prediction_singleton():
    X, y = _planted(4)
    assert vs.prediction_step(X, y, [3], None, FAST)[0] == (3,)
    with pytest.raises(DataError):
        vs.prediction_step(X, y, [], None, FAST)


def test_vsurf_planted_signal_nested_sets():
    X, y = _planted(5, informative=1)
    res = vs.vsurf(X, y, FAST, seed=0)
    assert 0 in res.prediction
    assert set(res.prediction) <= set(res.interpretation) <= set(res.thresholded)
    assert len(res.nested_errors) == len(res.thresholded)


def test_vsurf_deterministic(tmp_path):
    X, y = _planted(6)
    a = vs.vsurf(X, y, FAST, seed=3)
    b = vs.vsurf(X, y, FAST, seed=3)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    np.testing.assert_array_equal(a.nested_errors, b.nested_errors)


def test_degenerate_labels_rejected():
    X, _ = _planted(7)
    with pytest.raises(DataError, match="degenerate"):
        vs.vsurf(X, np.zeros(len(X), dtype=int), FAST)
