"""Covariance-driven partitioning of dimensions into equal subgroups.

All three strategies read only the ranking of diag(C): dimensions are sorted
by sampling variance (stable sort, ties broken by original index) and the
sorted order is sliced into m groups of D/m. Building a partition never costs
a fitness evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteVariance, ShapeMismatch

MIVD, RD, MAVD = 0, 1, 2
STRATEGY_NAMES = {MIVD: "mivd", RD: "rd", MAVD: "mavd"}


@dataclass
class Partition:
    groups: list  # m arrays of D/m dimension indices each
    strategy: int


def _check_diag(diag_c: np.ndarray, m: int) -> np.ndarray:
    diag_c = np.asarray(diag_c, dtype=float)
    if diag_c.ndim != 1:
        raise ShapeMismatch("diag(C) must be a vector")
    if not np.all(np.isfinite(diag_c)):
        raise NonFiniteVariance("diag(C) contains non-finite entries")
    if m < 1 or diag_c.size % m != 0:
        raise ShapeMismatch(f"D={diag_c.size} not divisible by m={m}")
    return diag_c


def mivd(diag_c: np.ndarray, m: int) -> Partition:
    """Group dimensions of similar variance: consecutive blocks of the sort."""
    diag_c = _check_diag(diag_c, m)
    order = np.argsort(diag_c, kind="stable")
    size = diag_c.size // m
    groups = [order[i * size:(i + 1) * size] for i in range(m)]
    return Partition(groups, MIVD)


def mavd(diag_c: np.ndarray, m: int) -> Partition:
    """Spread the variance spectrum: group k takes every m-th sorted dimension."""
    diag_c = _check_diag(diag_c, m)
    order = np.argsort(diag_c, kind="stable")
    groups = [order[k::m] for k in range(m)]
    return Partition(groups, MAVD)


def rd(dim: int, m: int, rng: np.random.Generator) -> Partition:
    """Uniform random permutation sliced into equal groups."""
    if m < 1 or dim % m != 0:
        raise ShapeMismatch(f"D={dim} not divisible by m={m}")
    order = rng.permutation(dim)
    size = dim // m
    groups = [order[i * size:(i + 1) * size] for i in range(m)]
    return Partition(groups, RD)


def validate(partition: Partition, dim: int, m: int):
    """Return None if the partition is well formed, else name the first violation."""
    groups = partition.groups
    if len(groups) != m:
        return f"group count violated: {len(groups)} != {m}"
    size = dim // m
    for g in groups:
        if len(g) != size:
            return f"size violated: group of {len(g)} != {size}"
    flat = np.concatenate([np.asarray(g) for g in groups]) if groups else np.array([], dtype=int)
    if flat.size and (flat.min() < 0 or flat.max() >= dim):
        return "index range violated"
    if np.unique(flat).size != flat.size:
        return "disjointness violated"
    if flat.size != dim:
        return "coverage violated"
    return None


def build(strategy: int, diag_c: np.ndarray, m: int, rng: np.random.Generator) -> Partition:
    """Dispatch on the action index (0=MiVD, 1=RD, 2=MaVD)."""
    if strategy == MIVD:
        return mivd(diag_c, m)
    if strategy == RD:
        return rd(len(diag_c), m, rng)
    if strategy == MAVD:
        return mavd(diag_c, m)
    raise ValueError(f"unknown strategy {strategy}")
