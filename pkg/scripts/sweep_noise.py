"""How much of the K* spread is forest noise? Re-run the K sweep with several tree counts.

    python scripts/sweep_noise.py --n 600 --seeds 1-10 --trees 100,300
"""

import argparse

from covsurf import cov_clustering as cc
from covsurf import pipeline as pl
from covsurf import simulation as sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--seeds", default="1-10")
    ap.add_argument("--trees", default="100,300")
    ap.add_argument("--kmax", type=int, default=None)
    a = ap.parse_args()
    lo, hi = map(int, a.seeds.split("-"))
    trees = [int(t) for t in a.trees.split(",")]
    print("seed " + " ".join(f"K*(q={q})" for q in trees))
    for seed in range(lo, hi + 1):
        df, y = sim.generate(sim.SimConfig(n=a.n, seed=seed))
        h = cc.build_hierarchy(df)
        kmax = a.kmax or pl.default_kmax(df.n, df.p)
        ks = [pl.select_k(pl.k_sweep(df, y, h, 2, kmax, q, seed)) for q in trees]
        print(f"{seed} " + " ".join(map(str, ks)), flush=True)


if __name__ == "__main__":
    main()
