"""Synthetic large-scale benchmark problems with category-controlled separability.

Problems are sums of weighted base functions over (possibly rotated) index
blocks of a shifted input. Every base function has minimum value 0 at the zero
vector, so the optimum of every generated problem sits at its shift vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted, ConfigError, DimensionMismatch

_E = float(np.exp(1.0))

CATEGORIES = (
    "FullySeparable",
    "PartialWithSep",
    "PartialNoSep",
    "Overlapping",
    "NonSeparable",
)

# additively separable bases, safe for FullySeparable blocks
_SEPARABLE_BASES = ("sphere", "elliptic", "rastrigin")
# bases used inside rotated (non-separable) blocks
_ROTATED_BASES = ("elliptic", "rastrigin", "ackley", "schwefel12", "rosenbrock")


def sphere(z: np.ndarray) -> np.ndarray:
    return np.sum(z * z, axis=-1)

def elliptic(z: np.ndarray) -> np.ndarray:
    d = z.shape[-1]
    if d == 1:
        w = np.ones(1)
    else:
        w = 10.0 ** (6.0 * np.arange(d) / (d - 1))
    return np.sum(w * z * z, axis=-1)

def rastrigin(z: np.ndarray) -> np.ndarray:
    return np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0, axis=-1)

def ackley(z: np.ndarray) -> np.ndarray:
    # grouped so both terms cancel exactly at z = 0
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.mean(z * z, axis=-1))) + 20.0
    b = -np.exp(np.mean(np.cos(2.0 * np.pi * z), axis=-1)) + _E
    return a + b

def schwefel12(z: np.ndarray) -> np.ndarray:
    c = np.cumsum(z, axis=-1)
    return np.sum(c * c, axis=-1)

def rosenbrock(z: np.ndarray) -> np.ndarray:
    # classic valley re-centred so the minimum is at the zero vector
    y = z + 1.0
    if y.shape[-1] < 2:
        return np.zeros(y.shape[:-1])
    a = y[..., :-1]
    b = y[..., 1:]
    return np.sum(100.0 * (a * a - b) ** 2 + (a - 1.0) ** 2, axis=-1)


BASE_FUNCTIONS = {
    "sphere": sphere,
    "elliptic": elliptic,
    "rastrigin": rastrigin,
    "ackley": ackley,
    "schwefel12": schwefel12,
    "rosenbrock": rosenbrock,
}


@dataclass
class EvalBudget:
    """Counts fitness evaluations against a hard cap.

    `phase` labels who is spending; per-phase tallies back the claim that
    decomposition itself never costs evaluations.
    """

    max_evals: int
    used: int = 0
    phase: str = "optimize"
    by_phase: dict = field(default_factory=dict)

    @property
    def remaining(self) -> int:
        return self.max_evals - self.used

    def charge(self, n: int = 1) -> None:
        if self.used + n > self.max_evals:
            raise BudgetExhausted(
                f"requested {n} evaluation(s) with {self.remaining} remaining "
                f"of {self.max_evals}"
            )
        self.used += n
        self.by_phase[self.phase] = self.by_phase.get(self.phase, 0) + n


@dataclass
class Component:
    kind: str
    indices: np.ndarray
    weight: float = 1.0
    rotation: np.ndarray | None = None


@dataclass
class Problem:
    name: str
    category: str
    dim: int
    components: list
    shift: np.ndarray
    lower: float
    upper: float
    role: str = "train"
    f_star: float = 0.0


def radius(problem: Problem) -> float:
    return (problem.upper - problem.lower) / 2.0


def diameter(problem: Problem) -> float:
    return 2.0 * radius(problem) * np.sqrt(problem.dim)


def optimum(problem: Problem):
    """Known optimum (location, value). Costs no evaluations."""
    return problem.shift.copy(), problem.f_star


def _raw_eval(problem: Problem, points: np.ndarray) -> np.ndarray:
    z = points - problem.shift
    total = np.zeros(points.shape[0])
    for comp in problem.components:
        sub = z[:, comp.indices]
        if comp.rotation is not None:
            sub = sub @ comp.rotation.T
        total += comp.weight * BASE_FUNCTIONS[comp.kind](sub)
    return total


def evaluate(problem: Problem, x: np.ndarray, budget: EvalBudget) -> float:
    """Evaluate one point, charging exactly one unit of budget."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise DimensionMismatch(
            f"point has shape {x.shape}, problem dimension is {problem.dim}"
        )
    budget.charge(1)
    return float(_raw_eval(problem, x[None, :])[0])


def evaluate_batch(problem: Problem, points: np.ndarray, budget: EvalBudget) -> np.ndarray:
    """Evaluate a (n, dim) batch; each row is charged as one evaluation."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != problem.dim:
        raise DimensionMismatch(
            f"batch has shape {points.shape}, problem dimension is {problem.dim}"
        )
    budget.charge(points.shape[0])
    return _raw_eval(problem, points)


@dataclass
class SuiteConfig:
    dims: int
    m: int
    categories: list
    n_train: int
    n_test: int
    seed: int
    bounds: tuple = (-100.0, 100.0)


def random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    q, r = np.linalg.qr(a)
    s = np.sign(np.diag(r))
    s[s == 0.0] = 1.0
    return q * s


def _random_sizes(rng: np.random.Generator, total: int, k: int, min_size: int = 2) -> list:
    w = rng.uniform(1.0, 2.0, size=k)
    sizes = np.maximum(min_size, (w / w.sum() * total).astype(int))
    i = 0
    while sizes.sum() != total:
        j = i % k
        if sizes.sum() > total and sizes[j] > min_size:
            sizes[j] -= 1
        elif sizes.sum() < total:
            sizes[j] += 1
        i += 1
    return [int(s) for s in sizes]


def _disjoint_blocks(rng: np.random.Generator, dim: int, k: int) -> list:
    k = max(1, min(k, dim // 2))
    perm = rng.permutation(dim)
    sizes = _random_sizes(rng, dim, k)
    blocks, start = [], 0
    for s in sizes:
        blocks.append(np.sort(perm[start:start + s]))
        start += s
    return blocks


def _build_fully_separable(rng, dim):
    k = int(rng.integers(2, 5))
    comps = []
    for idx in _disjoint_blocks(rng, dim, k):
        kind = _SEPARABLE_BASES[rng.integers(len(_SEPARABLE_BASES))]
        comps.append(Component(kind, idx))
    return comps

def _build_partial(rng, dim, with_separable):
    k = int(rng.integers(3, 6))
    blocks = _disjoint_blocks(rng, dim, k)
    k = len(blocks)
    sep_slot = int(rng.integers(k)) if with_separable else -1
    comps = []
    for i, idx in enumerate(blocks):
        if i == sep_slot:
            kind = _SEPARABLE_BASES[rng.integers(len(_SEPARABLE_BASES))]
            comps.append(Component(kind, idx))
        else:
            kind = _ROTATED_BASES[rng.integers(len(_ROTATED_BASES))]
            comps.append(Component(kind, idx, rotation=random_orthogonal(rng, len(idx))))
    return comps

def _build_overlapping(rng, dim):
    # sliding windows of width b with stride b - o cover [0, dim)
    candidates = []
    for o in (1, 2, 3):
        for b in range(o + 2, max(o + 3, dim // 3 + 1)):
            stride = b - o
            if (dim - b) % stride == 0 and (dim - b) // stride >= 1:
                candidates.append((o, b))
    if not candidates:
        raise ConfigError(f"dim={dim} too small for Overlapping windows")
    o, b = candidates[rng.integers(len(candidates))]
    stride = b - o
    k = (dim - b) // stride + 1
    comps = []
    for i in range(k):
        idx = np.arange(i * stride, i * stride + b)
        kind = _ROTATED_BASES[rng.integers(len(_ROTATED_BASES))]
        comps.append(Component(kind, idx, rotation=random_orthogonal(rng, b)))
    return comps

def _build_nonseparable(rng, dim):
    idx = np.arange(dim)
    kind = _ROTATED_BASES[rng.integers(len(_ROTATED_BASES))]
    return [Component(kind, idx, rotation=random_orthogonal(rng, dim))]


_BUILDERS = {
    "FullySeparable": lambda rng, dim: _build_fully_separable(rng, dim),
    "PartialWithSep": lambda rng, dim: _build_partial(rng, dim, True),
    "PartialNoSep": lambda rng, dim: _build_partial(rng, dim, False),
    "Overlapping": lambda rng, dim: _build_overlapping(rng, dim),
    "NonSeparable": lambda rng, dim: _build_nonseparable(rng, dim),
}


def _category_plan(cfg: SuiteConfig) -> list:
    """Assign a category to each problem; every requested category appears.

    Fully non-separable problems are kept out of the training split when other
    categories are available, so they exercise transfer at test time.
    """
    train_pool = [c for c in cfg.categories if c != "NonSeparable"] or list(cfg.categories)
    train_cats = [train_pool[i % len(train_pool)] for i in range(cfg.n_train)]
    missing = [c for c in cfg.categories if c not in train_cats]
    test_cats = []
    for i in range(cfg.n_test):
        if missing:
            test_cats.append(missing.pop(0))
        else:
            test_cats.append(cfg.categories[i % len(cfg.categories)])
    return train_cats, test_cats


def make_suite(cfg: SuiteConfig) -> list:
    """Deterministically generate the train + test problem list."""
    if cfg.dims % cfg.m != 0:
        raise ConfigError(f"dims={cfg.dims} not divisible by m={cfg.m}")
    for c in cfg.categories:
        if c not in CATEGORIES:
            raise ConfigError(f"unknown category {c!r}")
    if cfg.n_train < 1 or cfg.n_test < 0:
        raise ConfigError("need n_train >= 1 and n_test >= 0")
    lower, upper = float(cfg.bounds[0]), float(cfg.bounds[1])
    if not lower < upper:
        raise ConfigError("bounds must satisfy lower < upper")

    rng = np.random.default_rng(cfg.seed)
    train_cats, test_cats = _category_plan(cfg)
    problems = []
    for i, (cat, role) in enumerate(
        [(c, "train") for c in train_cats] + [(c, "test") for c in test_cats]
    ):
        shift = rng.uniform(0.8 * lower, 0.8 * upper, size=cfg.dims)
        comps = _BUILDERS[cat](rng, cfg.dims)
        problems.append(
            Problem(
                name=f"p{i:02d}",
                category=cat,
                dim=cfg.dims,
                components=comps,
                shift=shift,
                lower=lower,
                upper=upper,
                role=role,
            )
        )
    return problems


def describe(problem: Problem) -> dict:
    """Plain-data summary used by the suite manifest."""
    return {
        "name": problem.name,
        "category": problem.category,
        "role": problem.role,
        "dim": problem.dim,
        "bounds": [problem.lower, problem.upper],
        "components": [
            {
                "kind": c.kind,
                "size": int(len(c.indices)),
                "rotated": c.rotation is not None,
            }
            for c in problem.components
        ],
    }
