"""Simulated mixed datasets: block-correlated Gaussian design, median binarization,
logistic labels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixed_data import CATEGORICAL, NUMERIC, DataError, LabelVector, MixedDataFrame, Schema

_LARGE_BETA = tuple(np.repeat([1.0, 2.0, 3.0], 5) / 5.0)


@dataclass(frozen=True)
class Group:
    prefix: str
    size: int
    kind: str               # numeric | categorical | mixed | noise
    beta: tuple[float, ...]
    n_binarized: int = 0    # trailing columns turned into binary factors
    correlated: bool = True

    @property
    def informative(self) -> bool:
        return any(b != 0 for b in self.beta)


def default_groups() -> tuple[Group, ...]:
    groups = []
    for kind, prefix in (("numeric", "Num"), ("categorical", "Categ"), ("mixed", "Mixed")):
        # block order 3, 15, 12 within each type
        for size, tag, beta in ((3, "S", (1.0, 2.0, 3.0)), (15, "L", _LARGE_BETA), (12, "M", (0.0,) * 12)):
            nb = {"numeric": 0, "categorical": size, "mixed": size // 3}[kind]
            groups.append(Group(prefix + tag, size, kind, beta, nb))
    groups.append(Group("Noise", 30, "noise", (0.0,) * 30, 0, correlated=False))
    return tuple(groups)


@dataclass(frozen=True)
class SimConfig:
    n: int = 600
    rho: float = 0.9
    sigma2: float = 1.0
    intercept: float = -9.0
    seed: int = 0
    theoretical_median: bool = False
    groups: tuple[Group, ...] = field(default_factory=default_groups)

    @property
    def p(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def beta(self) -> np.ndarray:
        return np.concatenate([np.asarray(g.beta, dtype=np.float64) for g in self.groups])

    def group_slices(self) -> list[slice]:
        out, start = [], 0
        for g in self.groups:
            out.append(slice(start, start + g.size))
            start += g.size
        return out

    def group_of_column(self) -> np.ndarray:
        return np.concatenate([np.full(g.size, k) for k, g in enumerate(self.groups)])

    def column_names(self) -> tuple[str, ...]:
        return tuple(f"{g.prefix}{j + 1}" for g in self.groups for j in range(g.size))


def block(s: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(s) + rho * np.ones((s, s))


def covariance(config: SimConfig) -> np.ndarray:
    """Block-diagonal covariance: compound-symmetry blocks, sigma^2 I for the noise group."""
    if config.sigma2 <= 0:
        raise DataError("sigma2 must be positive")
    p = config.p
    S = np.zeros((p, p))
    for g, sl in zip(config.groups, config.group_slices()):
        if g.correlated:
            if g.size > 1 and not (-1.0 / (g.size - 1) < config.rho < 1.0):
                raise DataError(f"rho={config.rho} gives a non positive-definite {g.size}x{g.size} block")
            S[sl, sl] = block(g.size, config.rho)
        else:
            S[sl, sl] = config.sigma2 * np.eye(g.size)
    return S


def binarize(z: np.ndarray, theoretical: bool = False) -> np.ndarray:
    """0 below the median (empirical, or 0 if `theoretical`), 1 otherwise."""
    med = 0.0 if theoretical else np.median(z)
    return (z >= med).astype(np.float64)


def generate(config: SimConfig) -> tuple[MixedDataFrame, LabelVector]:
    Sigma = covariance(config)
    rng = np.random.default_rng(config.seed)
    L = np.linalg.cholesky(Sigma)
    z = rng.standard_normal((config.n, config.p)) @ L.T

    x = z.copy()
    kinds, levels = [], []
    for g, sl in zip(config.groups, config.group_slices()):
        for j in range(sl.start, sl.stop):
            if j >= sl.stop - g.n_binarized:
                x[:, j] = binarize(z[:, j], config.theoretical_median)
                kinds.append(CATEGORICAL)
                levels.append(("0", "1"))
            else:
                kinds.append(NUMERIC)
                levels.append(())

    # the -9 intercept centres x'beta only on the binarized scale (binary means 1/2)
    eta = x @ config.beta + config.intercept
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (rng.random(config.n) < prob).astype(np.int64)

    schema = Schema(config.column_names(), tuple(kinds), tuple(levels))
    return MixedDataFrame(schema, x), LabelVector(y, ("0", "1"))


def layout_summary(config: SimConfig) -> str:
    lines = [f"{'group':<8}{'type':<12}{'size':>5}{'binarized':>10}  informative"]
    for g in config.groups:
        lines.append(f"{g.prefix:<8}{g.kind:<12}{g.size:>5}{g.n_binarized:>10}  {'yes' if g.informative else 'no'}")
    return "\n".join(lines)
