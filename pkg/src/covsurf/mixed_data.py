"""Mixed numeric/categorical data frames, CSV ingestion and the two link measures."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class DataError(ValueError):
    """Raised for malformed input data."""


@dataclass(frozen=True)
class Schema:
    names: tuple[str, ...]
    kinds: tuple[str, ...]
    # levels[j] is () for numeric columns
    levels: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not (len(self.names) == len(self.kinds) == len(self.levels)):
            raise DataError("schema fields have different lengths")
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate column names")
        for name, kind, lv in zip(self.names, self.kinds, self.levels):
            if kind == NUMERIC:
                if lv:
                    raise DataError(f"numeric column {name!r} has levels")
            elif kind == CATEGORICAL:
                if len(lv) < 2:
                    raise DataError(f"categorical column {name!r} needs at least 2 levels")
                if len(set(lv)) != len(lv):
                    raise DataError(f"duplicate levels in column {name!r}")
            else:
                raise DataError(f"unknown column kind {kind!r}")

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def numeric_idx(self) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == NUMERIC]

    @property
    def categorical_idx(self) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == CATEGORICAL]

    def is_categorical(self) -> np.ndarray:
        return np.array([k == CATEGORICAL for k in self.kinds], dtype=bool)

    def n_levels(self) -> np.ndarray:
        return np.array([len(lv) for lv in self.levels], dtype=np.int64)

    def subset(self, cols: Sequence[int]) -> "Schema":
        return Schema(
            tuple(self.names[j] for j in cols),
            tuple(self.kinds[j] for j in cols),
            tuple(self.levels[j] for j in cols),
        )

    def to_dict(self) -> dict:
        cols = []
        for name, kind, lv in zip(self.names, self.kinds, self.levels):
            entry = {"name": name, "kind": kind}
            if kind == CATEGORICAL:
                entry["levels"] = list(lv)
            cols.append(entry)
        return {"columns": cols}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            cols = d["columns"]
            return cls(
                tuple(str(c["name"]) for c in cols),
                tuple(str(c["kind"]) for c in cols),
                tuple(tuple(str(v) for v in c.get("levels", ())) for c in cols),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from exc


@dataclass(frozen=True)
class MixedDataFrame:
    """n x p table; categorical cells hold level indices (stored as floats)."""

    schema: Schema
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != self.schema.p:
            raise DataError(f"values shape {values.shape} does not match {self.schema.p} columns")
        if values.shape[0] < 2:
            raise DataError("need at least 2 rows")
        if not np.all(np.isfinite(values)):
            raise DataError("missing or non-finite cells")
        for j in self.schema.categorical_idx:
            col = values[:, j]
            m = len(self.schema.levels[j])
            if np.any(col != np.round(col)) or np.any(col < 0) or np.any(col >= m):
                raise DataError(f"column {self.schema.names[j]!r}: level index out of range")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.schema.p

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def codes(self, j: int) -> np.ndarray:
        return self.values[:, j].astype(np.int64)

    def select_columns(self, cols: Sequence[int]) -> "MixedDataFrame":
        cols = list(cols)
        return MixedDataFrame(self.schema.subset(cols), self.values[:, cols])

    def take(self, rows: Sequence[int] | np.ndarray) -> "MixedDataFrame":
        return MixedDataFrame(self.schema, self.values[np.asarray(rows)])

    def check_compatible(self, schema: Schema) -> None:
        """Raise DataError naming the first column that disagrees with `schema`."""
        if self.schema == schema:
            return
        for j, name in enumerate(schema.names):
            if j >= self.schema.p or self.schema.names[j] != name:
                raise DataError(f"schema mismatch at column {j}: expected {name!r}")
            if self.schema.kinds[j] != schema.kinds[j]:
                raise DataError(f"schema mismatch in column {name!r}: kind differs")
            if self.schema.levels[j] != schema.levels[j]:
                raise DataError(f"schema mismatch in column {name!r}: levels differ")
        raise DataError(f"schema mismatch: {self.schema.p} columns, expected {schema.p}")


@dataclass(frozen=True)
class LabelVector:
    codes: np.ndarray = field(repr=False)
    classes: tuple[str, ...]

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64).copy()
        if codes.ndim != 1:
            raise DataError("labels must be one-dimensional")
        if len(codes) and (codes.min() < 0 or codes.max() >= len(self.classes)):
            raise DataError("label code out of range")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return len(self.codes)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def take(self, rows) -> "LabelVector":
        return LabelVector(self.codes[np.asarray(rows)], self.classes)

    def values(self) -> list[str]:
        return [self.classes[c] for c in self.codes]

    def require_supervised(self) -> None:
        if len(np.unique(self.codes)) < 2:
            raise DataError("degenerate labels: fewer than 2 distinct classes")

    @classmethod
    def from_values(cls, values: Sequence, classes: Sequence[str] | None = None) -> "LabelVector":
        strs = [_fmt_label(v) for v in values]
        if classes is None:
            classes = _sorted_labels(set(strs))
        classes = tuple(classes)
        lookup = {c: i for i, c in enumerate(classes)}
        try:
            codes = [lookup[s] for s in strs]
        except KeyError as exc:
            raise DataError(f"unknown class label {exc.args[0]!r}") from None
        return cls(np.array(codes, dtype=np.int64), classes)


def _fmt_label(v) -> str:
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return str(int(v))
    return str(v)


def _sorted_labels(labels) -> list[str]:
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def _parse_float(s: str) -> float | None:
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: ragged row at line {i} ({len(r)} fields, expected {len(header)})")
    return [h.strip() for h in header], [[c.strip() for c in r] for r in body]


def read_schema(path: str | Path) -> Schema:
    with open(path) as fh:
        try:
            return Schema.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid schema file: {exc}") from exc


def write_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=1) + "\n")


def load_csv(path: str | Path, schema: Schema | str | Path | None = None) -> MixedDataFrame:
    """Read a headed CSV. Column kinds come from `schema` if given, else are inferred.

    A column is inferred numeric iff every cell parses as a finite real number.
    Inferred categorical levels are ordered by first appearance.
    """
    path = Path(path)
    header, body = _read_rows(path)
    if isinstance(schema, (str, Path)):
        schema = read_schema(schema)
    cols = list(zip(*body))

    if schema is not None:
        if tuple(header) != schema.names:
            missing = [h for h in schema.names if h not in header]
            name = missing[0] if missing else next(
                h for h, s in zip(header, schema.names) if h != s)
            raise DataError(f"{path}: column {name!r} does not match the schema")
        values = np.empty((len(body), len(header)))
        for j, (name, kind, lv) in enumerate(zip(schema.names, schema.kinds, schema.levels)):
            if kind == NUMERIC:
                parsed = [_parse_float(c) for c in cols[j]]
                if any(v is None for v in parsed):
                    raise DataError(f"{path}: non-numeric cell in numeric column {name!r}")
                values[:, j] = parsed
            else:
                lookup = {s: i for i, s in enumerate(lv)}
                for i, c in enumerate(cols[j]):
                    if c not in lookup:
                        raise DataError(f"{path}: unknown level {c!r} in column {name!r}")
                    values[i, j] = lookup[c]
        return MixedDataFrame(schema, values)

    kinds, levels = [], []
    values = np.empty((len(body), len(header)))
    for j, name in enumerate(header):
        parsed = [_parse_float(c) for c in cols[j]]
        if all(v is not None for v in parsed):
            kinds.append(NUMERIC)
            levels.append(())
            values[:, j] = parsed
        else:
            lv = tuple(dict.fromkeys(cols[j]))
            lookup = {s: i for i, s in enumerate(lv)}
            kinds.append(CATEGORICAL)
            levels.append(lv)
            values[:, j] = [lookup[c] for c in cols[j]]
    return MixedDataFrame(Schema(tuple(header), tuple(kinds), tuple(levels)), values)


def write_csv(df: MixedDataFrame, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(df.schema.names)
        cat = df.schema.is_categorical()
        for row in df.values:
            w.writerow([
                df.schema.levels[j][int(v)] if cat[j] else repr(float(v))
                for j, v in enumerate(row)
            ])


def load_labels(path: str | Path, classes: Sequence[str] | None = None) -> LabelVector:
    """Labels CSV: header line then one label per row (last column is used)."""
    header, body = _read_rows(Path(path))
    return LabelVector.from_values([r[-1] for r in body], classes)


def write_labels(y: LabelVector, path: str | Path, header: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([header])
        for v in y.values():
            w.writerow([v])


# link measures -------------------------------------------------------------

def _centered(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    uc = u - u.mean()
    # relative test: a constant column can carry rounding noise of order eps*|mean|
    if np.sum(uc * uc) <= (1e-12 * max(1.0, float(np.abs(u).max()))) ** 2 * len(u):
        raise DataError("constant variable")
    return uc


def squared_correlation(u, x) -> float:
    """Squared Pearson correlation r^2(u, x)."""
    uc, xc = _centered(u), _centered(x)
    if len(uc) != len(xc):
        raise DataError("length mismatch")
    r2 = np.dot(uc, xc) ** 2 / (np.dot(uc, uc) * np.dot(xc, xc))
    return float(min(max(r2, 0.0), 1.0))


def correlation_ratio(u, g, n_levels: int | None = None) -> float:
    """Correlation ratio eta^2(u | g): share of Var(u) explained by the levels of g."""
    uc = _centered(u)
    g = np.asarray(g, dtype=np.int64)
    if len(g) != len(uc):
        raise DataError("length mismatch")
    m = int(g.max()) + 1 if n_levels is None else n_levels
    counts = np.bincount(g, minlength=m)
    if np.any(counts == 0):
        raise DataError("empty level")
    if m < 2:
        raise DataError("degenerate grouping: a single level")
    sums = np.bincount(g, weights=uc, minlength=m)
    between = np.sum(sums ** 2 / counts)
    return float(min(max(between / np.dot(uc, uc), 0.0), 1.0))
