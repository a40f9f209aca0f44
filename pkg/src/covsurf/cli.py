"""covsurf command line: simulate, fit, predict, loocv, benchmark.

All randomness flows from --seed. Sub-seeds are derived with numpy SeedSequence from
(seed, stream ids), so results do not depend on --threads.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import archive
from . import pipeline as pl
from . import simulation as sim
from .mixed_data import (DataError, MixedDataFrame, load_csv, load_labels, write_csv, write_labels,
                         write_schema)
from .vsurf import VsurfParams

PRESETS = {"sim600": 600, "sim60": 60}


def set_threads(n: int | None) -> int:
    import numba

    if n is None:
        env = os.environ.get("COVSURF_THREADS")
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $COVSURF_THREADS or all cores); never changes results")


def _add_pipeline(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--trees", type=int, default=500, help="trees of final / VSURF forests")
    p.add_argument("--sweep-trees", type=int, default=100)
    p.add_argument("--nfor", type=int, default=25, help="forests for VI statistics")
    p.add_argument("--nfor-nested", type=int, default=10, help="replicates per nested model")
    p.add_argument("--nested-trees", type=int, default=None)


def _params(a) -> pl.PipelineParams:
    return pl.PipelineParams(
        kmin=a.kmin, kmax=a.kmax, sweep_trees=a.sweep_trees, trees=a.trees,
        vsurf=VsurfParams(nfor=a.nfor, q=a.trees, nfor_nested=a.nfor_nested,
                          q_nested=a.nested_trees))


def _load_xy(a) -> tuple:
    df = load_csv(a.data, a.schema)
    y = load_labels(a.labels)
    if df.n != y.n:
        raise DataError(f"{a.data} has {df.n} rows but {a.labels} has {y.n} labels")
    return df, y


def cmd_simulate(a) -> int:
    cfg = sim.SimConfig(n=a.n, rho=a.rho, sigma2=a.sigma2, seed=a.seed,
                        theoretical_median=a.theoretical_median)
    df, y = sim.generate(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(df, out / "data.csv")
    write_labels(y, out / "labels.csv")
    write_schema(df.schema, out / "schema.json")
    print(sim.layout_summary(cfg))
    print(f"wrote {df.n} x {df.p} to {out}/ (data.csv, labels.csv, schema.json); "
          f"{len(df.schema.categorical_idx)} categorical columns, class 1 share {y.codes.mean():.3f}")
    return 0


def cmd_fit(a) -> int:
    if a.kmax is not None and a.kmax < a.kmin:
        print(f"usage error: --kmax ({a.kmax}) < --kmin ({a.kmin})", file=sys.stderr)
        return 2
    df, y = _load_xy(a)
    model = pl.fit(df, y, _params(a), a.seed)
    archive.save_model(model, a.out_model)
    if a.out_curve:
        model.curve.to_csv(a.out_curve)
    if a.out_dendrogram:
        Path(a.out_dendrogram).write_text(model.hierarchy.to_text())
    print(f"K* = {model.k_star}")
    print(f"m = {model.m} selected synthetic variables")
    for rank, (k, names) in enumerate(zip(model.selected, model.selected_clusters()), start=1):
        print(f"  {rank}. cluster {k + 1} ({len(names)} variables): {' '.join(names)}")
    return 0


def _read_rows_for(schema, path):
    """Parse rows one by one against `schema`; bad rows become error entries."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for name in schema.names:
        if name not in header:
            raise DataError(f"schema mismatch: column {name!r} missing from {path}")
    extra = [h for h in header if h not in schema.names]
    if extra:
        raise DataError(f"schema mismatch: unexpected column {extra[0]!r} in {path}")
    pos = [header.index(name) for name in schema.names]
    good, values, errors = [], [], {}
    for i, r in enumerate(rows[1:]):
        try:
            if len(r) != len(header):
                raise DataError("ragged row")
            vals = []
            for j, c in zip(range(schema.p), pos):
                cell = r[c].strip()
                if schema.kinds[j] == "numeric":
                    vals.append(float(cell))
                else:
                    if cell not in schema.levels[j]:
                        raise DataError(f"unknown level {cell!r} in column {schema.names[j]!r}")
                    vals.append(float(schema.levels[j].index(cell)))
            values.append(vals)
            good.append(i)
        except (DataError, ValueError) as exc:
            errors[i] = str(exc)
    return len(rows) - 1, good, np.array(values).reshape(len(good), schema.p), errors


def cmd_predict(a) -> int:
    model = archive.load_model(a.model)
    schema = model.partition.schema
    n, good, values, errors = _read_rows_for(schema, a.data)
    labels = {}
    if good:
        if len(good) == 1:
            values = np.vstack([values, values])
        preds = pl.predict(model, MixedDataFrame(schema, values)).values()
        labels = dict(zip(good, preds))
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "prediction", "error"])
        for i in range(n):
            w.writerow([i, labels.get(i, ""), errors.get(i, "")])
    if errors:
        print(f"{len(errors)} of {n} rows could not be scored (see {a.out})", file=sys.stderr)
        return 1
    print(f"wrote {n} predictions to {a.out}")
    return 0


def cmd_loocv(a) -> int:
    df, y = _load_xy(a)
    res = pl.loocv(df, y, _params(a), a.seed)
    res.to_csv(a.out)
    print(f"leave-one-out error = {res.error:.4f} over {res.n_folds} folds "
          f"({len(res.failures)} failed)")
    return 0


def cmd_benchmark(a) -> int:
    n = PRESETS[a.preset]
    params = _params(a)
    test_df, test_y = sim.generate(sim.SimConfig(n=a.test_n, seed=pl._sub_seed(a.seed, 900)))
    arms = tuple(a.arms.split(",")) if a.arms else pl.ARMS
    unknown = set(arms) - set(pl.ARMS)
    if unknown:
        print(f"usage error: unknown arm(s) {sorted(unknown)}", file=sys.stderr)
        return 2
    out = Path(a.out)
    header_written = False
    all_means = {arm: [] for arm in arms}
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for d in range(a.replicate_datasets):
            df, y = sim.generate(sim.SimConfig(n=n, seed=pl._sub_seed(a.seed, 901, d)))
            cmp_ = pl.compare_methods(df, y, test_df, test_y, reps=a.reps,
                                      seed=pl._sub_seed(a.seed, 902, d), params=params, arms=arms)
            names = [arm for arm in pl.ARMS if arm in cmp_.errors]
            if not header_written:
                w.writerow(["dataset", "rep", "k_star", "m"] + names)
                header_written = True
            for r in range(a.reps):
                w.writerow([d, r, cmp_.k_star or "", len(cmp_.cov_selected) or ""]
                           + [repr(float(cmp_.errors[arm][r])) for arm in names])
            for arm, v in cmp_.means().items():
                all_means[arm].append(v)
            print(f"dataset {d}: K*={cmp_.k_star} m={len(cmp_.cov_selected)} "
                  + " ".join(f"{arm}={v:.4f}" for arm, v in cmp_.means().items()), flush=True)
    print("mean test error: " + " ".join(f"{arm}={np.mean(v):.4f}" for arm, v in all_means.items() if v))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covsurf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated mixed dataset")
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--theoretical-median", action="store_true",
                   help="binarize at 0 instead of the sample median")
    p.add_argument("--out", default=".")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the pipeline and write a model archive")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-curve", default=None, help="CSV of (K, oob_error)")
    p.add_argument("--out-dendrogram", default=None)
    _add_pipeline(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict labels with a model archive")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("loocv", help="external leave-one-out error of the whole pipeline")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    _add_pipeline(p)
    _add_common(p)
    p.set_defaults(func=cmd_loocv)

    p = sub.add_parser("benchmark", help="CoV/VSURF vs CoV/RF vs VSURF vs RF on simulated data")
    p.add_argument("--preset", choices=sorted(PRESETS), default="sim600")
    p.add_argument("--reps", type=int, default=100, help="forest retrainings per arm")
    p.add_argument("--replicate-datasets", type=int, default=1, help="regenerated learning sets")
    p.add_argument("--test-n", type=int, default=600)
    p.add_argument("--arms", default=None, help="comma-separated subset of " + ",".join(pl.ARMS))
    p.add_argument("--out", required=True)
    _add_pipeline(p)
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    set_threads(args.threads)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
