"""Ascendant hierarchical clustering of mixed variables (homogeneity = first PCAmix eigenvalue)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import pcamix
from .mixed_data import DataError, MixedDataFrame, Schema, correlation_ratio, squared_correlation

TIE_TOL = 1e-10


def homogeneity(df: MixedDataFrame, cluster: Sequence[int]) -> float:
    """H(C): first PCAmix eigenvalue of the cluster's columns."""
    cluster = sorted(cluster)
    if not cluster:
        raise DataError("empty cluster")
    return pcamix.first_eigenvalue(df.select_columns(cluster))


def dissimilarity(df: MixedDataFrame, a: Sequence[int], b: Sequence[int]) -> float:
    """Loss of homogeneity when merging a and b: H(a) + H(b) - H(a u b)."""
    if set(a) & set(b):
        raise DataError("overlapping clusters")
    if not a or not b:
        raise DataError("empty cluster")
    d = homogeneity(df, a) + homogeneity(df, b) - homogeneity(df, list(a) + list(b))
    return max(d, 0.0)


class _ClusterEigen:
    """lambda_1 of any column subset from one whitened copy of the full PCAmix Z.

    Standardization and indicator weighting are per variable, so the PCAmix matrix of a
    cluster is a column block of the full-frame W = N^1/2 Z M^1/2.
    """

    def __init__(self, df: MixedDataFrame):
        inp = pcamix.preprocess(df)
        self.W = np.sqrt(inp.row_weights)[:, None] * inp.Z * np.sqrt(inp.col_weights)[None, :]
        self.gram = self.W.T @ self.W
        self.n = df.n
        self.cols = [np.flatnonzero(inp.col_var == j) for j in range(df.p)]

    def lambda1(self, variables: Sequence[int]) -> float:
        idx = np.concatenate([self.cols[j] for j in variables])
        if len(idx) <= self.n:
            S = self.gram[np.ix_(idx, idx)]
        else:
            Wc = self.W[:, idx]
            S = Wc @ Wc.T
        k = S.shape[0]
        if k <= 32:
            return float(np.linalg.eigvalsh(S)[-1])
        return float(scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[k - 1, k - 1])[0])


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Hierarchy:
    """p-1 merges; node ids 0..p-1 are variables, merge i creates node p+i."""

    p: int
    merges: tuple[Merge, ...]
    names: tuple[str, ...] = ()

    def members(self, node: int) -> tuple[int, ...]:
        if node < self.p:
            return (node,)
        m = self.merges[node - self.p]
        return tuple(sorted(self.members(m.left) + self.members(m.right)))

    def partition(self, K: int) -> list[tuple[int, ...]]:
        """Clusters after the first p-K merges, ordered by smallest member."""
        if not 1 <= K <= self.p:
            raise DataError(f"K={K} outside [1, {self.p}]")
        groups: dict[int, tuple[int, ...]] = {j: (j,) for j in range(self.p)}
        for i, m in enumerate(self.merges[: self.p - K]):
            groups[self.p + i] = tuple(sorted(groups.pop(m.left) + groups.pop(m.right)))
        return sorted(groups.values())

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def inversions(self) -> list[int]:
        """Merge steps whose height is below an earlier one (non-ultrametric)."""
        h = self.heights()
        return [i for i in range(1, len(h)) if h[i] < h[:i].max()]

    def leaf_order(self) -> list[int]:
        if self.p == 1:
            return [0]
        out: list[int] = []
        stack = [self.p + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < self.p:
                out.append(node)
            else:
                m = self.merges[node - self.p]
                stack.extend([m.right, m.left])
        return out

    def to_text(self) -> str:
        lines = ["# step left right height size"]
        for i, m in enumerate(self.merges):
            lines.append(f"{i + 1} {m.left} {m.right} {m.height!r} {m.size}")
        if self.names:
            lines.append("# leaves: id name")
            lines.extend(f"# {j} {name}" for j, name in enumerate(self.names))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "names": list(self.names),
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hierarchy":
        return cls(
            int(d["p"]),
            tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in d["merges"]),
            tuple(d.get("names", ())),
        )


def build_hierarchy(df: MixedDataFrame) -> Hierarchy:
    """Greedy agglomeration: each step merges the pair with the smallest dissimilarity.

    Ties within TIE_TOL go to the pair whose (smaller, larger) minimum member index is
    lexicographically smallest.
    """
    p = df.p
    eig = _ClusterEigen(df)
    members: dict[int, tuple[int, ...]] = {j: (j,) for j in range(p)}
    lam = {j: eig.lambda1((j,)) for j in range(p)}
    dist: dict[tuple[int, int], float] = {}
    union_lam: dict[tuple[int, int], float] = {}

    def update(a: int, b: int) -> None:
        key = (a, b) if a < b else (b, a)
        lu = eig.lambda1(members[a] + members[b])
        union_lam[key] = lu
        dist[key] = lam[a] + lam[b] - lu

    ids = list(range(p))
    for i in range(p):
        for j in range(i + 1, p):
            update(i, j)

    merges = []
    for step in range(p - 1):
        best = min(dist.values())
        cands = [k for k, v in dist.items() if v <= best + TIE_TOL]
        key = min(
            cands,
            key=lambda k: tuple(sorted((members[k[0]][0], members[k[1]][0]))),
        )
        a, b = key
        new = p + step
        members[new] = tuple(sorted(members[a] + members[b]))
        lam[new] = union_lam[key]
        merges.append(Merge(a, b, max(dist[key], 0.0), len(members[new])))
        ids.remove(a)
        ids.remove(b)
        for k in [k for k in dist if a in k or b in k]:
            del dist[k]
            del union_lam[k]
        for other in ids:
            update(other, new)
        ids.append(new)
        del members[a], members[b]
    return Hierarchy(p, tuple(merges), df.schema.names)


@dataclass(frozen=True)
class SyntheticVariable:
    """First PCAmix component of one cluster, kept as a linear score predictor."""

    columns: tuple[int, ...]
    schema: Schema
    intercept: float
    coef: np.ndarray
    eigenvalue: float
    scores: np.ndarray
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    level_counts: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def fit(cls, df: MixedDataFrame, columns: Sequence[int]) -> "SyntheticVariable":
        columns = tuple(sorted(columns))
        model = pcamix.fit(df.select_columns(columns))
        return cls(
            columns=columns,
            schema=model.schema,
            intercept=float(model.intercept[0]),
            coef=model.coef[:, 0].copy(),
            eigenvalue=float(model.eigenvalues[0]),
            scores=model.F[:, 0].copy(),
            means=model.means,
            stds=model.stds,
            level_counts=model.level_counts,
        )

    def predict(self, rows: MixedDataFrame) -> np.ndarray:
        X = pcamix.design_matrix(self.schema, rows.select_columns(self.columns))
        return self.intercept + X @ self.coef

    def loadings_share(self, rows: MixedDataFrame) -> np.ndarray:
        """Per member variable: its r^2 / eta^2 with the synthetic variable, divided by lambda_1."""
        sub = rows.select_columns(self.columns)
        f = self.predict(rows)
        out = np.empty(len(self.columns))
        for k, kind in enumerate(sub.schema.kinds):
            if kind == "numeric":
                out[k] = squared_correlation(f, sub.column(k))
            else:
                out[k] = correlation_ratio(f, sub.codes(k), len(sub.schema.levels[k]))
        return out / out.sum()


@dataclass(frozen=True)
class PartitionModel:
    clusters: tuple[tuple[int, ...], ...]
    synthetic: tuple[SyntheticVariable, ...]
    schema: Schema

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def homogeneity(self) -> float:
        return float(sum(s.eigenvalue for s in self.synthetic))

    def training_scores(self) -> np.ndarray:
        return np.column_stack([s.scores for s in self.synthetic])

    def cluster_names(self, k: int) -> list[str]:
        return [self.schema.names[j] for j in self.clusters[k]]


def cut(df: MixedDataFrame, hierarchy: Hierarchy, K: int) -> PartitionModel:
    clusters = hierarchy.partition(K)
    return PartitionModel(
        clusters=tuple(clusters),
        synthetic=tuple(SyntheticVariable.fit(df, c) for c in clusters),
        schema=df.schema,
    )


def synthetic_scores(partition: PartitionModel, rows: MixedDataFrame) -> np.ndarray:
    rows.check_compatible(partition.schema)
    return np.column_stack([s.predict(rows) for s in partition.synthetic])
