import json
import warnings

import numpy as np
import pytest

from covsurf import archive
from covsurf import pipeline as pl
from covsurf import simulation as sim
from covsurf.cov_clustering import build_hierarchy
from covsurf.mixed_data import DataError, LabelVector
from covsurf.vsurf import NothingSurvives, VsurfParams

from frames import numeric_frame

TINY = pl.PipelineParams(sweep_trees=30, trees=50, vsurf=VsurfParams(nfor=5, q=50, nfor_nested=2))


def _small_config(n=150, seed=0):
    groups = (
        sim.Group("A", 3, "numeric", (1.0, 1.0, 1.0)),
        sim.Group("B", 3, "mixed", (1.0, 1.0, 1.0), 1),
        sim.Group("C", 3, "numeric", (0.0, 0.0, 0.0)),
        sim.Group("N", 5, "noise", (0.0,) * 5, 0, correlated=False),
    )
    return sim.SimConfig(n=n, seed=seed, intercept=-0.5, groups=groups)


@pytest.fixture(scope="module")
def small():
    return sim.generate(_small_config())


@pytest.fixture(scope="module")
def small_model(small):
    df, y = small
    return pl.fit(df, y, TINY, seed=11)


def _curve(errors, ks=None):
    errors = np.asarray(errors, dtype=float)
    ks = np.arange(2, 2 + len(errors)) if ks is None else np.asarray(ks)
    return pl.KSweepCurve(ks, errors)


def test_select_k_valley_and_ties():
    assert pl.select_k(_curve([0.4, 0.3, 0.2, 0.25])) == 4
    assert pl.select_k(_curve([0.4, 0.2, 0.3, 0.2])) == 3
    with pytest.raises(DataError):
        pl.select_k(_curve([]))


def test_k_grid():
    assert pl.k_grid(2, 10, 10) == list(range(2, 11))
    g = pl.k_grid(2, 2000, 5000)
    assert g[0] == 2 and g[-1] == 2000 and g == sorted(set(g)) and len(g) <= 60
    assert pl.default_kmax(44, 5000) == 43


def test_k_sweep_properties(small):
    df, y = small
    h = build_hierarchy(df)
    curve = pl.k_sweep(df, y, h, 2, 8, q=30, seed=1)
    np.testing.assert_array_equal(curve.ks, np.arange(2, 9))
    assert np.all((curve.errors >= 0) & (curve.errors <= 1))
    again = pl.k_sweep(df, y, h, 2, 8, q=30, seed=1)
    np.testing.assert_array_equal(curve.errors, again.errors)
    with pytest.raises(DataError):
        pl.k_sweep(df, y, h, 5, 4)
    with pytest.raises(DataError):
        pl.k_sweep(df, y, h, 2, df.p + 1)


def test_k_sweep_null_labels_flat():
    df, _ = sim.generate(_small_config(n=200, seed=5))
    y = LabelVector(np.random.default_rng(0).integers(0, 2, 200), ("0", "1"))
    curve = pl.k_sweep(df, y, build_hierarchy(df), 2, 10, q=100, seed=0)
    assert np.all(np.abs(curve.errors - 0.5) < 0.15)


def test_fit_invariants(small, small_model):
    df, y = small
    model = small_model
    assert 1 <= model.m <= model.k_star <= df.p
    assert model.forest.feature.shape[0] == TINY.trees
    assert len(model.forest.schema.names) == model.m
    assert model.k_star == pl.select_k(model.curve)
    assert set(pl.predict(model, df).values()) <= set(y.classes)
    assert pl.evaluate(model, df, y) < 0.2


def test_fit_selects_informative_blocks(small, small_model):
    names = {n for cl in small_model.selected_clusters() for n in cl}
    assert names & {"A1", "A2", "A3"}


def test_fit_falls_back_when_nothing_survives(small, monkeypatch):
    df, y = small

    def boom(*args, **kwargs):
        raise NothingSurvives("nothing survives thresholding")

    monkeypatch.setattr(pl, "vsurf", boom)
    params = pl.PipelineParams(kmax=4, sweep_trees=20, trees=20, vsurf=TINY.vsurf)
    with pytest.warns(UserWarning, match="VSURF kept no"):
        model = pl.fit(df, y, params, seed=0)
    assert model.selected == tuple(range(model.k_star))


def test_fit_length_mismatch(small):
    df, y = small
    with pytest.raises(DataError):
        pl.fit(df, y.take(range(10)), TINY)


def test_loocv_stub_separable():
    df = numeric_frame([[0.0, 1.0], [0.1, 1.2], [5.0, -1.0], [5.2, -0.8]])
    y = LabelVector(np.array([0, 0, 1, 1]), ("0", "1"))

    def fit_nn(d, yy, params, seed):
        return d, yy

    def predict_nn(model, rows):
        d, yy = model
        i = int(np.argmin(((d.values - rows.values[0]) ** 2).sum(axis=1)))
        return yy.take([i])

    res = pl.loocv(df, y, TINY, 0, fit_nn, predict_nn)
    assert res.n_folds == 4 and res.error == 0.0 and not res.failures


def test_loocv_leakage_guard():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.arange(6.0), rng.normal(size=6)])
    df = numeric_frame(X)
    y = LabelVector(np.array([0, 1, 0, 1, 0, 1]), ("0", "1"))
    seen = []

    def fit_spy(d, yy, params, seed):
        seen.append(set(d.values[:, 0].tolist()))
        return yy

    def predict_first(model, rows):
        return model.take([0])

    res = pl.loocv(df, y, TINY, 0, fit_spy, predict_first)
    assert res.n_folds == 6
    for i, ids in enumerate(seen):
        assert ids == set(range(6)) - {i}


def test_loocv_real_pipeline_records_failures(tmp_path):
    df = numeric_frame([[0.0, 1.0, 3.0], [0.2, 2.0, -1.0], [5.0, 0.5, 2.0]])
    y = LabelVector(np.array([0, 0, 1]), ("0", "1"))
    params = pl.PipelineParams(kmax=3, sweep_trees=5, trees=5,
                               vsurf=VsurfParams(nfor=2, q=5, nfor_nested=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = pl.loocv(df, y, params, 0)
    assert res.n_folds == 3
    assert list(res.failures) == [2] and "degenerate" in res.failures[2]
    assert res.predictions[0] in ("0", "1") and res.predictions[1] in ("0", "1")
    res.to_csv(tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().count("\n") == 4
    with pytest.raises(DataError):
        pl.loocv(df.take([0, 1]), y.take([0, 1]), params)


def test_compare_methods_shape(small, small_model):
    df, y = small
    test_df, test_y = sim.generate(_small_config(n=80, seed=9))
    cmp_ = pl.compare_methods(df, y, test_df, test_y, reps=2, seed=0, params=TINY, model=small_model)
    assert list(cmp_.errors) == list(pl.ARMS)
    for e in cmp_.errors.values():
        assert e.shape == (2,) and np.all((e >= 0) & (e <= 1))
    only = pl.compare_methods(df, y, test_df, test_y, reps=1, seed=0, params=TINY, arms=("RF",))
    assert list(only.errors) == ["RF"] and only.k_star is None


def test_archive_round_trip(small, small_model, tmp_path):
    df, _ = small
    path = tmp_path / "m.json"
    archive.save_model(small_model, path)
    back = archive.load_model(path)
    np.testing.assert_array_equal(pl.predict(back, df).codes, pl.predict(small_model, df).codes)
    assert archive.dumps(back) == path.read_text()


def test_archive_rejects_garbage(tmp_path, small_model):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(archive.ArchiveError, match="invalid model archive"):
        archive.load_model(bad)
    d = archive.model_to_dict(small_model)
    d["selected"] = [999]
    bad.write_text(json.dumps(d))
    with pytest.raises(archive.ArchiveError):
        archive.load_model(bad)
    d = archive.model_to_dict(small_model)
    d["version"] = 99
    bad.write_text(json.dumps(d))
    with pytest.raises(archive.ArchiveError, match="version"):
        archive.load_model(bad)


def test_fit_is_deterministic(small):
    df, y = small
    params = pl.PipelineParams(kmax=6, sweep_trees=20, trees=30, vsurf=TINY.vsurf)
    a = archive.dumps(pl.fit(df, y, params, seed=4))
    b = archive.dumps(pl.fit(df, y, params, seed=4))
    assert a == b
