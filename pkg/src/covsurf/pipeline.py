"""Clustering of variables followed by random-forest selection of synthetic variables.

fit: hierarchy -> K sweep scored by OOB error -> K* -> VSURF on the K* synthetic
variables -> final forest on the m selected ones.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import random_forest as rf
from .cov_clustering import (Hierarchy, PartitionModel, SyntheticVariable, build_hierarchy)
from .mixed_data import DataError, LabelVector, MixedDataFrame
from .vsurf import NothingSurvives, VsurfParams, VsurfResult, vsurf

log = logging.getLogger(__name__)

ARMS = ("CoV/VSURF", "CoV/RF", "VSURF", "RF")


@dataclass(frozen=True)
class PipelineParams:
    kmin: int = 2
    kmax: int | None = None       # None: min(p, n - 1, 2000)
    sweep_trees: int = 100
    trees: int = 500
    vsurf: VsurfParams = field(default_factory=VsurfParams)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("kmin", "kmax", "sweep_trees", "trees")}
        d["vsurf"] = dict(self.vsurf.__dict__)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineParams":
        d = dict(d)
        d["vsurf"] = VsurfParams(**d.get("vsurf", {}))
        return cls(**d)


def _sub_seed(seed: int, *stream: int) -> int:
    return int(rf.derive_seeds(seed, 1, *stream)[0])


class SyntheticCache:
    """Synthetic variables keyed by cluster; nested cuts share all but one split per K."""

    def __init__(self, df: MixedDataFrame):
        self.df = df
        self._cache: dict[tuple[int, ...], SyntheticVariable] = {}

    def get(self, cluster) -> SyntheticVariable:
        key = tuple(cluster)
        if key not in self._cache:
            self._cache[key] = SyntheticVariable.fit(self.df, key)
        return self._cache[key]

    def partition(self, hierarchy: Hierarchy, K: int) -> PartitionModel:
        clusters = hierarchy.partition(K)
        return PartitionModel(tuple(clusters), tuple(self.get(c) for c in clusters), self.df.schema)


@dataclass(frozen=True)
class KSweepCurve:
    ks: np.ndarray
    errors: np.ndarray

    @property
    def k_star(self) -> int:
        return select_k(self)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "oob_error"])
            for k, e in zip(self.ks, self.errors):
                w.writerow([int(k), repr(float(e))])


def select_k(curve: KSweepCurve) -> int:
    """Smallest K attaining the minimum OOB error."""
    if len(curve.ks) == 0:
        raise DataError("empty K sweep")
    errs = np.asarray(curve.errors)
    best = np.nanmin(errs)
    return int(min(k for k, e in zip(curve.ks, errs) if e == best))


def default_kmax(n: int, p: int) -> int:
    return min(p, n - 1, 2000)


def k_grid(kmin: int, kmax: int, p: int) -> list[int]:
    """Every K when p <= 200, else a geometric grid (refined later around its best point)."""
    if p <= 200:
        return list(range(kmin, kmax + 1))
    pts = np.unique(np.round(np.geomspace(kmin, kmax, 60)).astype(int))
    return [int(k) for k in pts]


def _sweep_error(scores: np.ndarray, y: LabelVector, q: int, seed: int) -> float:
    K = scores.shape[1]
    forest = rf.train_arrays(scores, y.codes, y.n_classes, rf.numeric_frame(scores).schema,
                             y.classes, q=q, mtry=rf.default_mtry(K), seed=seed)
    return rf.oob_error_codes(forest, np.ascontiguousarray(scores), y.codes)


def k_sweep(df: MixedDataFrame, y: LabelVector, hierarchy: Hierarchy, kmin: int = 2,
            kmax: int | None = None, q: int = 100, seed: int = 0,
            cache: SyntheticCache | None = None) -> KSweepCurve:
    """OOB error of a forest on the K synthetic variables, for each K in [kmin, kmax]."""
    p = df.p
    kmax = default_kmax(df.n, p) if kmax is None else kmax
    if not (2 <= kmin <= kmax <= p):
        raise DataError(f"need 2 <= kmin <= kmax <= p, got kmin={kmin}, kmax={kmax}, p={p}")
    y.require_supervised()
    cache = cache or SyntheticCache(df)
    done: dict[int, float] = {}

    def run(ks):
        for K in ks:
            if K not in done:
                scores = cache.partition(hierarchy, K).training_scores()
                done[K] = _sweep_error(scores, y, q, _sub_seed(seed, 10, K))

    grid = k_grid(kmin, kmax, p)
    run(grid)
    if p > 200:
        i = grid.index(min(grid, key=lambda k: (done[k], k)))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        step = max(1, math.ceil((hi - lo) / 200))
        run(range(lo, hi + 1, step))
    ks = np.array(sorted(done))
    return KSweepCurve(ks, np.array([done[k] for k in ks]))


@dataclass
class CovsurfModel:
    hierarchy: Hierarchy
    k_star: int
    partition: PartitionModel
    selected: tuple[int, ...]     # cluster indices, VSURF interpretation order
    forest: rf.Forest
    curve: KSweepCurve
    params: PipelineParams
    seed: int
    vsurf_result: VsurfResult | None = None

    @property
    def m(self) -> int:
        return len(self.selected)

    def selected_clusters(self) -> list[list[str]]:
        return [self.partition.cluster_names(k) for k in self.selected]

    def scores(self, rows: MixedDataFrame) -> np.ndarray:
        rows.check_compatible(self.partition.schema)
        return np.column_stack([self.partition.synthetic[k].predict(rows) for k in self.selected])


def fit(df: MixedDataFrame, y: LabelVector, params: PipelineParams = PipelineParams(),
        seed: int = 0, hierarchy: Hierarchy | None = None) -> CovsurfModel:
    if df.n != y.n:
        raise DataError("data and labels have different lengths")
    y.require_supervised()
    hierarchy = hierarchy or build_hierarchy(df)
    cache = SyntheticCache(df)
    kmax = default_kmax(df.n, df.p) if params.kmax is None else params.kmax
    curve = k_sweep(df, y, hierarchy, params.kmin, kmax, params.sweep_trees, _sub_seed(seed, 1), cache)
    k_star = select_k(curve)
    partition = cache.partition(hierarchy, k_star)
    scores = partition.training_scores()
    try:
        vres = vsurf(scores, y, params.vsurf, _sub_seed(seed, 2))
        selected = vres.interpretation
    except NothingSurvives:
        warnings.warn("VSURF kept no synthetic variable; using all K* of them")
        vres, selected = None, tuple(range(k_star))
    log.info("K*=%d, m=%d", k_star, len(selected))
    forest = _final_forest(scores[:, list(selected)], y, params.trees, _sub_seed(seed, 3))
    return CovsurfModel(hierarchy, k_star, partition, tuple(selected), forest, curve, params,
                        seed, vres)


def _final_forest(scores: np.ndarray, y: LabelVector, q: int, seed: int) -> rf.Forest:
    frame = rf.numeric_frame(scores)
    return rf.train_arrays(scores, y.codes, y.n_classes, frame.schema, y.classes, q=q,
                           mtry=rf.default_mtry(scores.shape[1]), seed=seed)


def predict(model: CovsurfModel, rows: MixedDataFrame) -> LabelVector:
    return LabelVector(rf.predict_codes(model.forest, model.scores(rows)), model.forest.classes)


def evaluate(model: CovsurfModel, df: MixedDataFrame, y: LabelVector) -> float:
    return float(np.mean(predict(model, df).codes != y.codes))


@dataclass(frozen=True)
class LoocvResult:
    predictions: list           # predicted class name, or None for a failed fold
    truth: list
    failures: dict              # fold index -> error message

    @property
    def error(self) -> float:
        pairs = [(p, t) for p, t in zip(self.predictions, self.truth) if p is not None]
        return float(np.mean([p != t for p, t in pairs])) if pairs else float("nan")

    @property
    def n_folds(self) -> int:
        return len(self.truth)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "truth", "prediction", "status"])
            for i, (p, t) in enumerate(zip(self.predictions, self.truth)):
                w.writerow([i, t, "" if p is None else p, self.failures.get(i, "ok")])


def loocv(df: MixedDataFrame, y: LabelVector, params: PipelineParams = PipelineParams(),
          seed: int = 0, fit_fn: Callable | None = None, predict_fn: Callable | None = None
          ) -> LoocvResult:
    """External leave-one-out: the whole pipeline is refit without row i, then predicts row i."""
    if df.n < 3:
        raise DataError("loocv needs n >= 3")
    fit_fn = fit_fn or fit
    predict_fn = predict_fn or predict
    truth = y.values()
    preds: list = []
    failures: dict = {}
    for i in range(df.n):
        train = np.delete(np.arange(df.n), i)
        try:
            model = fit_fn(df.take(train), y.take(train), params, _sub_seed(seed, 40, i))
            # frames hold >= 2 rows, so the held-out row is scored twice
            preds.append(predict_fn(model, df.take([i, i])).values()[0])
        except Exception as exc:  # a failing fold is recorded, not fatal
            failures[i] = f"{type(exc).__name__}: {exc}"
            preds.append(None)
    return LoocvResult(preds, truth, failures)


@dataclass
class Comparison:
    errors: dict                  # arm -> per-rep test errors
    k_star: int | None = None
    cov_selected: tuple = ()
    vsurf_selected: tuple = ()
    info: dict = field(default_factory=dict)

    def means(self) -> dict:
        return {a: float(np.mean(e)) for a, e in self.errors.items()}

    def to_csv(self, path, extra: dict | None = None) -> None:
        arms = [a for a in ARMS if a in self.errors]
        reps = len(next(iter(self.errors.values())))
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(extra) + ["rep"] + arms)
            for r in range(reps):
                w.writerow(list(extra.values()) + [r] + [repr(float(self.errors[a][r])) for a in arms])


def _rep_errors(X: np.ndarray, y: LabelVector, Xt: np.ndarray, yt: LabelVector, reps: int,
                q: int, seed: int, schema) -> np.ndarray:
    out = np.empty(reps)
    for r in range(reps):
        forest = rf.train_arrays(X, y.codes, y.n_classes, schema, y.classes, q=q,
                                 mtry=rf.default_mtry(X.shape[1]), seed=_sub_seed(seed, r))
        out[r] = np.mean(rf.predict_codes(forest, np.ascontiguousarray(Xt)) != yt.codes)
    return out


def compare_methods(df: MixedDataFrame, y: LabelVector, test_df: MixedDataFrame,
                    test_y: LabelVector, reps: int = 100, seed: int = 0,
                    params: PipelineParams = PipelineParams(), arms=ARMS,
                    model: CovsurfModel | None = None) -> Comparison:
    """Test errors of `reps` retrained forests for each arm.

    CoV/VSURF: forests on the m selected synthetic variables; CoV/RF: on all K* of them;
    VSURF: on the original columns of one VSURF interpretation set; RF: on all original columns.
    """
    test_df.check_compatible(df.schema)
    errors = {}
    out = Comparison(errors)
    if {"CoV/VSURF", "CoV/RF"} & set(arms):
        model = model or fit(df, y, params, _sub_seed(seed, 50))
        out.k_star, out.cov_selected = model.k_star, model.selected
        train_all = model.partition.training_scores()
        test_all = np.column_stack([s.predict(test_df) for s in model.partition.synthetic])
        schema_all = rf.numeric_frame(train_all).schema
        sel = list(model.selected)
        if "CoV/VSURF" in arms:
            errors["CoV/VSURF"] = _rep_errors(train_all[:, sel], y, test_all[:, sel], test_y, reps,
                                              params.trees, _sub_seed(seed, 51),
                                              schema_all.subset(sel))
        if "CoV/RF" in arms:
            errors["CoV/RF"] = _rep_errors(train_all, y, test_all, test_y, reps, params.trees,
                                           _sub_seed(seed, 52), schema_all)
    if "VSURF" in arms:
        try:
            vsel = vsurf(df, y, params.vsurf, _sub_seed(seed, 53)).interpretation
        except NothingSurvives:
            vsel = tuple(range(df.p))
        out.vsurf_selected = vsel
        cols = list(vsel)
        errors["VSURF"] = _rep_errors(df.values[:, cols], y, test_df.values[:, cols], test_y, reps,
                                      params.trees, _sub_seed(seed, 54), df.schema.subset(cols))
    if "RF" in arms:
        errors["RF"] = _rep_errors(df.values, y, test_df.values, test_y, reps, params.trees,
                                   _sub_seed(seed, 55), df.schema)
    out.errors = {a: errors[a] for a in ARMS if a in errors}
    return out
