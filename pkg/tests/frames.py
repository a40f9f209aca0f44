"""Random mixed frames shared by the test modules."""

import numpy as np

from covsurf.mixed_data import CATEGORICAL, NUMERIC, MixedDataFrame, Schema


def random_frame(rng, n, p1, p2, max_levels=4):
    names, kinds, levels, cols = [], [], [], []
    for j in range(p1):
        names.append(f"x{j}")
        kinds.append(NUMERIC)
        levels.append(())
        cols.append(rng.normal(size=n) * rng.uniform(0.5, 3) + rng.normal())
    for j in range(p2):
        m = int(rng.integers(2, max_levels + 1))
        codes = rng.integers(0, m, n)
        codes[:m] = np.arange(m)  # every level observed
        rng.shuffle(codes)
        names.append(f"g{j}")
        kinds.append(CATEGORICAL)
        levels.append(tuple(f"l{k}" for k in range(m)))
        cols.append(codes.astype(float))
    return MixedDataFrame(Schema(tuple(names), tuple(kinds), tuple(levels)), np.column_stack(cols))


def numeric_frame(X):
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    return MixedDataFrame(Schema(tuple(f"x{j}" for j in range(p)), (NUMERIC,) * p, ((),) * p), X)
