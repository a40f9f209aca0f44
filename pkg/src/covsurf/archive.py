"""JSON model archive. Floats are written with repr, so a load reproduces predictions bit for bit."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cov_clustering import Hierarchy, PartitionModel, SyntheticVariable
from .mixed_data import DataError, Schema
from .pipeline import CovsurfModel, KSweepCurve, PipelineParams
from .random_forest import Forest

FORMAT = "covsurf-model"
VERSION = 1


class ArchiveError(DataError):
    pass


def _synthetic_to_dict(s: SyntheticVariable) -> dict:
    return {
        "columns": list(s.columns),
        "intercept": s.intercept,
        "coef": s.coef.tolist(),
        "eigenvalue": s.eigenvalue,
        "means": s.means.tolist(),
        "stds": s.stds.tolist(),
        "level_counts": s.level_counts.tolist(),
    }


def _synthetic_from_dict(d: dict, schema: Schema) -> SyntheticVariable:
    cols = tuple(int(c) for c in d["columns"])
    return SyntheticVariable(
        columns=cols,
        schema=schema.subset(cols),
        intercept=float(d["intercept"]),
        coef=np.asarray(d["coef"], dtype=np.float64),
        eigenvalue=float(d["eigenvalue"]),
        scores=np.zeros(0),
        means=np.asarray(d["means"], dtype=np.float64),
        stds=np.asarray(d["stds"], dtype=np.float64),
        level_counts=np.asarray(d["level_counts"], dtype=np.float64),
    )


def model_to_dict(model: CovsurfModel) -> dict:
    schema = model.partition.schema
    return {
        "format": FORMAT,
        "version": VERSION,
        "seed": model.seed,
        "params": model.params.to_dict(),
        "schema": schema.to_dict(),
        "hierarchy": model.hierarchy.to_dict(),
        "k_star": model.k_star,
        "synthetic": [_synthetic_to_dict(s) for s in model.partition.synthetic],
        "selected": list(model.selected),
        "curve": {"K": model.curve.ks.tolist(), "oob_error": model.curve.errors.tolist()},
        "forest": model.forest.to_dict(),
    }


def model_from_dict(d: dict) -> CovsurfModel:
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise ArchiveError("invalid model archive: not a covsurf model")
    if d.get("version") != VERSION:
        raise ArchiveError(f"invalid model archive: unsupported version {d.get('version')!r}")
    try:
        schema = Schema.from_dict(d["schema"])
        synthetic = tuple(_synthetic_from_dict(s, schema) for s in d["synthetic"])
        partition = PartitionModel(tuple(s.columns for s in synthetic), synthetic, schema)
        selected = tuple(int(k) for k in d["selected"])
        if len(synthetic) != int(d["k_star"]) or any(not 0 <= k < len(synthetic) for k in selected):
            raise ArchiveError("invalid model archive: inconsistent cluster indices")
        forest = Forest.from_dict(d["forest"])
        if forest.feature.shape[0] == 0 or len(forest.schema.names) != len(selected):
            raise ArchiveError("invalid model archive: forest does not match selection")
        return CovsurfModel(
            hierarchy=Hierarchy.from_dict(d["hierarchy"]),
            k_star=int(d["k_star"]),
            partition=partition,
            selected=selected,
            forest=forest,
            curve=KSweepCurve(np.asarray(d["curve"]["K"]), np.asarray(d["curve"]["oob_error"])),
            params=PipelineParams.from_dict(d["params"]),
            seed=int(d["seed"]),
        )
    except ArchiveError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ArchiveError(f"invalid model archive: {type(exc).__name__}: {exc}") from exc


def dumps(model: CovsurfModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: CovsurfModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model))


def load_model(path: str | Path) -> CovsurfModel:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"invalid model archive: {exc}") from exc
    return model_from_dict(d)
