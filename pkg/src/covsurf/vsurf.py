"""Three-step random-forest variable selection: thresholding, interpretation, prediction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from . import random_forest as rf
from .mixed_data import DataError, LabelVector, MixedDataFrame, Schema


class NothingSurvives(DataError):
    pass


@dataclass(frozen=True)
class VsurfParams:
    nfor: int = 25              # forests for VI mean / sd
    q: int = 500                # trees per forest
    mtry: int | None = None     # None: floor(sqrt(#variables)) of each model
    nfor_nested: int = 10       # replicates averaged per nested model (steps 2 and 3)
    q_nested: int | None = None  # trees for nested models; None: q
    vi_repeats: int = 1
    # piecewise-constant fit of VI sd vs rank (rpart defaults)
    min_split: int = 20
    min_bucket: int = 7
    cp: float = 0.01


@dataclass(frozen=True)
class VIStats:
    mean: np.ndarray
    sd: np.ndarray
    order: np.ndarray   # variables by decreasing mean VI (stable)
    threshold: float


@dataclass(frozen=True)
class VsurfResult:
    stats: VIStats
    thresholded: tuple[int, ...]
    interpretation: tuple[int, ...]
    prediction: tuple[int, ...]
    nested_errors: np.ndarray   # OOB error of the model on the top-k survivors, k = 1..
    pred_threshold: float
    names: tuple[str, ...] = field(default=())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["variable", "mean_vi", "sd_vi", "thresholded", "interpretation", "prediction"])
            for j in self.stats.order:
                name = self.names[j] if self.names else str(j)
                w.writerow([name, repr(float(self.stats.mean[j])), repr(float(self.stats.sd[j])),
                            int(j in self.thresholded), int(j in self.interpretation),
                            int(j in self.prediction)])

    def curve_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_variables", "oob_error"])
            for k, e in enumerate(self.nested_errors, start=1):
                w.writerow([k, repr(float(e))])


def _sub_seed(seed: int, *stream: int) -> int:
    return int(rf.derive_seeds(seed, 1, *stream)[0])


def _as_arrays(X, y):
    if isinstance(X, MixedDataFrame):
        schema, values = X.schema, X.values
    else:
        values = np.asarray(X, dtype=np.float64)
        k = values.shape[1]
        schema = Schema(tuple(f"f{j + 1}" for j in range(k)), ("numeric",) * k, ((),) * k)
    if isinstance(y, LabelVector):
        y.require_supervised()
        return values, schema, y.codes, y.n_classes, y.classes
    y = np.asarray(y, dtype=np.int64)
    classes = tuple(str(c) for c in range(int(y.max()) + 1))
    if len(np.unique(y)) < 2:
        raise DataError("degenerate labels: fewer than 2 distinct classes")
    return values, schema, y, len(classes), classes


def _oob(values, schema, y, n_classes, classes, cols, q, mtry, seed):
    cols = list(cols)
    m = rf.default_mtry(len(cols)) if mtry is None else min(mtry, len(cols))
    forest = rf.train_arrays(values[:, cols], y, n_classes, schema.subset(cols), classes,
                             q=q, mtry=m, seed=seed)
    return rf.oob_error_codes(forest, np.ascontiguousarray(values[:, cols]), y)


def _nested_error(values, schema, y, n_classes, classes, cols, params, seed, stream):
    q = params.q_nested or params.q
    errs = [_oob(values, schema, y, n_classes, classes, cols, q, params.mtry,
                 _sub_seed(seed, *stream, r)) for r in range(params.nfor_nested)]
    return float(np.mean(errs))


def vi_threshold(sd_by_rank: np.ndarray, params: VsurfParams = VsurfParams()) -> float:
    """Minimum prediction of a regression tree of VI sd on rank."""
    ranks = np.arange(1, len(sd_by_rank) + 1, dtype=np.float64)[:, None]
    var_root = float(np.var(sd_by_rank))
    reg = DecisionTreeRegressor(min_samples_split=params.min_split,
                                min_samples_leaf=params.min_bucket,
                                min_impurity_decrease=params.cp * var_root,
                                random_state=0)
    reg.fit(ranks, sd_by_rank)
    return float(reg.predict(ranks).min())


def threshold_step(X, y, params: VsurfParams = VsurfParams(), seed: int = 0):
    """VI statistics over `nfor` forests and the variables whose mean VI clears the threshold."""
    values, schema, codes, n_classes, classes = _as_arrays(X, y)
    p = values.shape[1]
    vis = np.empty((params.nfor, p))
    mtry = rf.default_mtry(p) if params.mtry is None else min(params.mtry, p)
    Xc = np.ascontiguousarray(values)
    for r in range(params.nfor):
        s = _sub_seed(seed, 1, r)
        forest = rf.train_arrays(values, codes, n_classes, schema, classes, q=params.q,
                                 mtry=mtry, seed=s)
        vis[r] = rf.importance_codes(forest, Xc, codes, seed=s, n_repeats=params.vi_repeats).importance
    mean = vis.mean(axis=0)
    sd = vis.std(axis=0, ddof=1) if params.nfor > 1 else np.zeros(p)
    order = np.argsort(-mean, kind="stable")
    thr = vi_threshold(sd[order], params)
    survivors = tuple(int(j) for j in order if mean[j] >= thr)
    stats = VIStats(mean, sd, order, thr)
    if not survivors:
        raise NothingSurvives("nothing survives thresholding")
    return stats, survivors


def interpretation_step(X, y, ranked, params: VsurfParams = VsurfParams(), seed: int = 0):
    """Nested forests on the top-1, top-2, ... variables; keep the prefix with minimal OOB error.

    Returns (interpretation set, OOB error of every nested model).
    """
    values, schema, codes, n_classes, classes = _as_arrays(X, y)
    ranked = list(ranked)
    if not ranked:
        raise DataError("no variables to interpret")
    errs = np.array([
        _nested_error(values, schema, codes, n_classes, classes, ranked[:k], params, seed, (2, k))
        for k in range(1, len(ranked) + 1)
    ])
    k_best = int(np.argmin(errs)) + 1
    return tuple(ranked[:k_best]), errs


def prediction_threshold(nested_errors: np.ndarray, m_interp: int) -> float:
    tail = np.asarray(nested_errors)[m_interp - 1:]
    return float(np.mean(np.abs(np.diff(tail)))) if len(tail) > 1 else 0.0


def prediction_step(X, y, interpretation, nested_errors=None, params: VsurfParams = VsurfParams(),
                    seed: int = 0):
    """Step-wise introduction in VI order; a variable stays only if OOB error drops by more
    than the mean jump of the nested-model curve beyond the interpretation prefix.

    Returns (prediction set, threshold).
    """
    values, schema, codes, n_classes, classes = _as_arrays(X, y)
    interpretation = list(interpretation)
    if not interpretation:
        raise DataError("empty interpretation set")
    thr = 0.0 if nested_errors is None else prediction_threshold(nested_errors, len(interpretation))
    selected = [interpretation[0]]
    if len(interpretation) == 1:
        return tuple(selected), thr
    cur = _nested_error(values, schema, codes, n_classes, classes, selected, params, seed, (3, 1))
    for k, v in enumerate(interpretation[1:], start=2):
        err = _nested_error(values, schema, codes, n_classes, classes, selected + [v], params,
                            seed, (3, k))
        if cur - err > thr:
            selected.append(v)
            cur = err
    return tuple(selected), thr


def vsurf(X, y, params: VsurfParams = VsurfParams(), seed: int = 0) -> VsurfResult:
    stats, survivors = threshold_step(X, y, params, seed)
    interp, errs = interpretation_step(X, y, survivors, params, seed)
    pred, thr = prediction_step(X, y, interp, errs, params, seed)
    names = X.schema.names if isinstance(X, MixedDataFrame) else ()
    result = VsurfResult(stats, survivors, interp, pred, errs, thr, names)
    assert set(pred) <= set(interp) <= set(survivors)
    return result
