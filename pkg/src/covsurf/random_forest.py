"""Random forest classifier: bootstrap, mtry-restricted Gini CART, majority vote,
OOB error and permutation variable importance."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .mixed_data import DataError, LabelVector, MixedDataFrame, Schema

MAX_LEVELS = 10


def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total < 1:
        raise DataError("empty node")
    pc = counts / total
    return float(np.sum(pc * (1.0 - pc)))


def default_mtry(p: int) -> int:
    return max(1, int(math.isqrt(p)))


def derive_seeds(seed: int, count: int, *stream: int) -> np.ndarray:
    """`count` 32-bit seeds derived from (seed, *stream); prefix-stable in `count`."""
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return ss.generate_state(max(count, 1), dtype=np.uint32)[:count].astype(np.int64)


@dataclass(frozen=True)
class SplitCandidate:
    var: int
    threshold: float = 0.0
    levels: tuple[int, ...] = ()
    score: float = 0.0

    def weighted_gini(self, n: int) -> float:
        """Count-weighted Gini sum of the two children."""
        return n - self.score


def _column_meta(schema: Schema) -> tuple[np.ndarray, np.ndarray]:
    is_cat = schema.is_categorical()
    n_levels = schema.n_levels()
    too_many = [schema.names[j] for j in np.flatnonzero(n_levels > MAX_LEVELS)]
    if too_many:
        raise DataError(f"too many levels (> {MAX_LEVELS}) in column {too_many[0]!r}")
    return is_cat, n_levels


def best_split(df: MixedDataFrame, y: LabelVector, rows, candidates) -> SplitCandidate | None:
    """Best Gini split of the node made of `rows` (with multiplicity) over `candidates`."""
    is_cat, n_levels = _column_meta(df.schema)
    rows = np.asarray(rows, dtype=np.int64)
    cand = np.sort(np.asarray(candidates, dtype=np.int64))
    score, var, thr, mask = K.best_split_node(
        np.ascontiguousarray(df.values), y.codes, rows, 0, len(rows), cand,
        is_cat, n_levels, y.n_classes)
    if var < 0:
        return None
    if is_cat[var]:
        levels = tuple(lv for lv in range(n_levels[var]) if (mask >> lv) & 1)
        return SplitCandidate(int(var), 0.0, levels, float(score))
    return SplitCandidate(int(var), float(thr), (), float(score))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    catmask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    inbag: np.ndarray

    @property
    def oob(self) -> np.ndarray:
        return np.flatnonzero(self.inbag == 0)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "catmask": self.catmask.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "label": self.label.tolist(),
            "inbag": self.inbag.tolist(),
        }


@dataclass
class Forest:
    feature: np.ndarray
    threshold: np.ndarray
    catmask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    node_count: np.ndarray
    inbag: np.ndarray
    mtry: int
    seed: int
    schema: Schema
    classes: tuple[str, ...]
    _is_cat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._is_cat = self.schema.is_categorical()

    @property
    def q(self) -> int:
        return self.feature.shape[0]

    def tree(self, t: int) -> Tree:
        c = self.node_count[t]
        return Tree(self.feature[t, :c], self.threshold[t, :c], self.catmask[t, :c],
                    self.left[t, :c], self.right[t, :c], self.label[t, :c], self.inbag[t])

    def tree_predictions(self, X: np.ndarray) -> np.ndarray:
        return K.predict_trees(self.feature, self.threshold, self.catmask, self.left,
                               self.right, self.label, self._is_cat, np.ascontiguousarray(X))

    def _matrix(self, rows: MixedDataFrame) -> np.ndarray:
        rows.check_compatible(self.schema)
        return np.ascontiguousarray(rows.values)

    def to_dict(self) -> dict:
        return {
            "mtry": self.mtry,
            "seed": self.seed,
            "classes": list(self.classes),
            "schema": self.schema.to_dict(),
            "trees": [self.tree(t).to_dict() for t in range(self.q)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        trees = d["trees"]
        q = len(trees)
        width = max(len(t["feature"]) for t in trees)
        n = len(trees[0]["inbag"])
        arr = {
            "feature": np.full((q, width), -1, dtype=np.int64),
            "threshold": np.zeros((q, width)),
            "catmask": np.zeros((q, width), dtype=np.int64),
            "left": np.full((q, width), -1, dtype=np.int64),
            "right": np.full((q, width), -1, dtype=np.int64),
            "label": np.zeros((q, width), dtype=np.int64),
        }
        inbag = np.zeros((q, n), dtype=np.int32)
        counts = np.zeros(q, dtype=np.int64)
        for t, tr in enumerate(trees):
            c = len(tr["feature"])
            counts[t] = c
            for key, a in arr.items():
                a[t, :c] = tr[key]
            inbag[t] = tr["inbag"]
        return cls(**arr, node_count=counts, inbag=inbag, mtry=int(d["mtry"]),
                   seed=int(d["seed"]), schema=Schema.from_dict(d["schema"]),
                   classes=tuple(d["classes"]))


def train_arrays(X: np.ndarray, y: np.ndarray, n_classes: int, schema: Schema,
                 classes: tuple[str, ...], q: int = 500, mtry: int | None = None,
                 seed: int = 0) -> Forest:
    is_cat, n_levels = _column_meta(schema)
    p = X.shape[1]
    mtry = default_mtry(p) if mtry is None else int(mtry)
    if q < 1:
        raise DataError("q must be >= 1")
    if not 1 <= mtry <= p:
        raise DataError(f"mtry={mtry} outside [1, {p}]")
    if len(np.unique(y)) < 2:
        raise DataError("degenerate labels: fewer than 2 distinct classes")
    seeds = derive_seeds(seed, q, 0)
    out = K.grow_forest(np.ascontiguousarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64),
                        n_classes, is_cat, n_levels, mtry, seeds)
    feature, threshold, catmask, left, right, label, node_count, inbag = out
    w = int(node_count.max())
    return Forest(feature[:, :w].copy(), threshold[:, :w].copy(), catmask[:, :w].copy(),
                  left[:, :w].copy(), right[:, :w].copy(), label[:, :w].copy(),
                  node_count, inbag, mtry, int(seed), schema, tuple(classes))


def train_forest(X: MixedDataFrame, y: LabelVector, q: int = 500, mtry: int | None = None,
                 seed: int = 0) -> Forest:
    """Grow q unpruned trees; tree t uses RNG streams derived from (seed, t)."""
    if X.n != y.n:
        raise DataError("X and y lengths differ")
    if X.n < 2:
        raise DataError("need at least 2 rows")
    y.require_supervised()
    return train_arrays(X.values, y.codes, y.n_classes, X.schema, y.classes, q, mtry, seed)


def numeric_frame(F: np.ndarray, prefix: str = "f") -> MixedDataFrame:
    """Wrap a score matrix as an all-numeric frame (columns f1..fK)."""
    F = np.asarray(F, dtype=np.float64)
    k = F.shape[1]
    names = tuple(f"{prefix}{j + 1}" for j in range(k))
    return MixedDataFrame(Schema(names, ("numeric",) * k, ((),) * k), F)


def predict_codes(forest: Forest, X: np.ndarray) -> np.ndarray:
    preds = forest.tree_predictions(X)
    return K.vote(preds, np.ones(preds.shape, dtype=np.bool_), len(forest.classes))


def predict(forest: Forest, rows: MixedDataFrame) -> LabelVector:
    """Majority vote over trees, ties to the smaller class index."""
    return LabelVector(predict_codes(forest, forest._matrix(rows)), forest.classes)


def oob_votes(forest: Forest, X: np.ndarray) -> np.ndarray:
    preds = forest.tree_predictions(X)
    return K.vote(preds, forest.inbag == 0, len(forest.classes))


def oob_error_codes(forest: Forest, X: np.ndarray, y: np.ndarray) -> float:
    v = oob_votes(forest, X)
    has = v >= 0
    if not has.any():
        return float("nan")
    return float(np.mean(v[has] != y[has]))


def oob_error(forest: Forest, X: MixedDataFrame, y: LabelVector) -> float:
    """Misclassification rate of OOB majority votes; rows never OOB are skipped."""
    return oob_error_codes(forest, forest._matrix(X), y.codes)


@dataclass(frozen=True)
class VIReport:
    importance: np.ndarray
    err: np.ndarray
    errperm: np.ndarray
    names: tuple[str, ...]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("variable,importance\n")
            for name, v in zip(self.names, self.importance):
                fh.write(f"{name},{v!r}\n")


def importance_codes(forest: Forest, X: np.ndarray, y: np.ndarray, seed: int = 0,
                     n_repeats: int = 1) -> VIReport:
    seeds = derive_seeds(seed, forest.q, 1)
    err, errperm = K.permutation_errors(
        forest.feature, forest.threshold, forest.catmask, forest.left, forest.right,
        forest.label, forest._is_cat, np.ascontiguousarray(X), np.asarray(y, dtype=np.int64),
        forest.inbag, seeds, int(n_repeats))
    keep = ~np.isnan(err)
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} tree(s) without OOB rows excluded from importance")
    diffs = errperm[keep] - err[keep][:, None]
    # fixed-order reduction over trees
    vi = diffs.sum(axis=0) / max(int(keep.sum()), 1)
    return VIReport(vi, err, errperm, forest.schema.names)


def variable_importance(forest: Forest, X: MixedDataFrame, y: LabelVector, seed: int = 0,
                        n_repeats: int = 1) -> VIReport:
    """Mean over trees of (OOB error after permuting column j) - (OOB error)."""
    return importance_codes(forest, forest._matrix(X), y.codes, seed, n_repeats)
