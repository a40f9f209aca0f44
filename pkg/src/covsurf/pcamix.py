"""PCA of mixed data via a generalized SVD (the PCAmix method).

Numeric columns are standardized (population variance), categorical columns
become centered indicator blocks weighted by n/n_s, rows are weighted 1/n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixed_data import DataError, MixedDataFrame, Schema

RANK_TOL = 1e-10


@dataclass(frozen=True)
class PcamixInput:
    Z: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray
    # per Z column: index of the source variable in the frame
    col_var: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    level_counts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p1: int = 0
    p2: int = 0

    @property
    def m(self) -> int:
        """Total number of categorical levels."""
        return self.Z.shape[1] - self.p1


@dataclass(frozen=True)
class GsvdResult:
    U: np.ndarray
    sv: np.ndarray
    V: np.ndarray

    @property
    def r(self) -> int:
        return len(self.sv)


@dataclass(frozen=True)
class PcamixModel:
    schema: Schema
    gsvd: GsvdResult
    F: np.ndarray
    A: np.ndarray
    eigenvalues: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    level_counts: np.ndarray
    n: int
    p1: int
    # intercept[alpha], coef[:, alpha] over the p1 + m columns of (numerics | indicators)
    intercept: np.ndarray
    coef: np.ndarray

    @property
    def A1(self) -> np.ndarray:
        return self.A[: self.p1]

    @property
    def A2(self) -> np.ndarray:
        return self.A[self.p1:]


def preprocess(df: MixedDataFrame) -> PcamixInput:
    """Build Z = (standardized numerics | centered indicators) and the metrics N, M."""
    n = df.n
    num = df.schema.numeric_idx
    cat = df.schema.categorical_idx
    blocks, col_var, col_w = [], [], []
    means = np.zeros(len(num))
    stds = np.zeros(len(num))
    for k, j in enumerate(num):
        x = df.column(j)
        means[k] = x.mean()
        stds[k] = x.std()
        if stds[k] <= 1e-12 * max(1.0, np.abs(x).max()):
            raise DataError(f"zero variance in numeric column {df.schema.names[j]!r}")
        blocks.append(((x - means[k]) / stds[k])[:, None])
        col_var.append(j)
        col_w.append(1.0)
    counts = []
    for j in cat:
        m_j = len(df.schema.levels[j])
        G = np.zeros((n, m_j))
        G[np.arange(n), df.codes(j)] = 1.0
        n_s = G.sum(axis=0)
        if np.any(n_s == 0):
            lv = df.schema.levels[j][int(np.argmin(n_s))]
            raise DataError(f"empty level {lv!r} in column {df.schema.names[j]!r}")
        blocks.append(G - n_s / n)
        col_var.extend([j] * m_j)
        col_w.extend(n / n_s)
        counts.extend(n_s)
    Z = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return PcamixInput(
        Z=Z,
        row_weights=np.full(n, 1.0 / n),
        col_weights=np.asarray(col_w, dtype=np.float64),
        col_var=np.asarray(col_var, dtype=np.int64),
        means=means,
        stds=stds,
        level_counts=np.asarray(counts, dtype=np.float64),
        p1=len(num),
        p2=len(cat),
    )


def gsvd(inp: PcamixInput) -> GsvdResult:
    """Z = U diag(sv) V^T with U^T N U = I and V^T M V = I."""
    Z = np.asarray(inp.Z, dtype=np.float64)
    n, c = Z.shape
    sn = np.sqrt(inp.row_weights)
    sm = np.sqrt(inp.col_weights)
    if n == 0 or c == 0:
        return GsvdResult(np.zeros((n, 0)), np.zeros(0), np.zeros((c, 0)))
    Ut, s, Vt = np.linalg.svd(sn[:, None] * Z * sm[None, :], full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return GsvdResult(np.zeros((n, 0)), np.zeros(0), np.zeros((c, 0)))
    r = int(np.sum(s > RANK_TOL * s[0]))
    U = Ut[:, :r] / sn[:, None]
    V = Vt[:r].T / sm[:, None]
    # deterministic signs: largest-magnitude entry of each V column is positive
    pivot = np.argmax(np.abs(V), axis=0)
    sign = np.sign(V[pivot, np.arange(r)])
    sign[sign == 0] = 1.0
    return GsvdResult(U * sign, s[:r].copy(), V * sign)


def fit(df: MixedDataFrame) -> PcamixModel:
    inp = preprocess(df)
    res = gsvd(inp)
    F = res.U * res.sv
    A = inp.col_weights[:, None] * res.V * res.sv
    n, p1 = df.n, inp.p1
    V = res.V
    coef = np.empty_like(V)
    coef[:p1] = V[:p1] / inp.stds[:, None]
    coef[p1:] = V[p1:] * (n / inp.level_counts)[:, None]
    intercept = -(inp.means / inp.stds) @ V[:p1] - V[p1:].sum(axis=0)
    return PcamixModel(
        schema=df.schema,
        gsvd=res,
        F=F,
        A=A,
        eigenvalues=res.sv ** 2,
        means=inp.means,
        stds=inp.stds,
        level_counts=inp.level_counts,
        n=n,
        p1=p1,
        intercept=intercept,
        coef=coef,
    )


def first_eigenvalue(df: MixedDataFrame) -> float:
    ev = fit(df).eigenvalues
    return float(ev[0]) if ev.size else 0.0


def design_matrix(schema: Schema, df: MixedDataFrame) -> np.ndarray:
    """Raw numerics followed by level indicators, in PCAmix column order."""
    df.check_compatible(schema)
    cols = [df.column(j)[:, None] for j in schema.numeric_idx]
    for j in schema.categorical_idx:
        G = np.zeros((df.n, len(schema.levels[j])))
        G[np.arange(df.n), df.codes(j)] = 1.0
        cols.append(G)
    return np.hstack(cols) if cols else np.zeros((df.n, 0))


def predict_scores(model: PcamixModel, rows: MixedDataFrame, components=None) -> np.ndarray:
    """Scores of `rows` on the selected principal components (default: all)."""
    comps = np.arange(model.gsvd.r) if components is None else np.atleast_1d(components)
    X = design_matrix(model.schema, rows)
    return model.intercept[comps] + X @ model.coef[:, comps]
