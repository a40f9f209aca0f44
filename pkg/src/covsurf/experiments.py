"""Helpers that score a fitted pipeline against the planted simulation structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cov_clustering import PartitionModel
from .mixed_data import MixedDataFrame
from .simulation import SimConfig


def recovered_groups(clusters, config: SimConfig) -> list[int]:
    """Planted correlated groups that appear exactly as one cluster."""
    cl = {tuple(sorted(c)) for c in clusters}
    out = []
    for k, (g, sl) in enumerate(zip(config.groups, config.group_slices())):
        if g.correlated and tuple(range(sl.start, sl.stop)) in cl:
            out.append(k)
    return out


@dataclass(frozen=True)
class ClusterProfile:
    dominant_group: int       # group with the largest share of lambda_1
    dominant_share: float
    informative_share: float  # share of lambda_1 carried by variables with beta != 0


def profile_clusters(partition: PartitionModel, df: MixedDataFrame, config: SimConfig) -> list[ClusterProfile]:
    group_of = config.group_of_column()
    informative = config.beta != 0
    out = []
    for cols, syn in zip(partition.clusters, partition.synthetic):
        share = syn.loadings_share(df)
        groups = group_of[list(cols)]
        per_group = np.bincount(groups, weights=share, minlength=len(config.groups))
        dom = int(np.argmax(per_group))
        out.append(ClusterProfile(dom, float(per_group[dom]), float(share[informative[list(cols)]].sum())))
    return out


def selection_summary(partition: PartitionModel, selected, df: MixedDataFrame, config: SimConfig) -> dict:
    """Which informative groups the selected clusters stand for, how many selected clusters
    are dominated by non-informative variables, and how many by the uncorrelated noise group."""
    profiles = profile_clusters(partition, df, config)
    chosen = [profiles[k] for k in selected]
    informative_groups = {k for k, g in enumerate(config.groups) if g.informative}
    covered = {p.dominant_group for p in chosen if p.informative_share >= 0.5} & informative_groups
    uninformative = sum(p.informative_share < 0.5 for p in chosen)
    noise = sum(not config.groups[p.dominant_group].correlated for p in chosen)
    kinds = [config.groups[g].kind for g in sorted(covered)]
    return {
        "covered_informative_groups": sorted(covered),
        "n_covered": len(covered),
        "n_uninformative_selected": int(uninformative),
        "n_noise_selected": int(noise),
        "covered_kinds": kinds,
    }
