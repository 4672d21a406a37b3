"""State features fed to the strategy-selection policy, plus the step reward.

The state is three concatenated blocks: 12 global-optimization descriptors,
4 per subgroup from the last macro step's sub-runs, and 2 per action from the
episode's action history. Lengths are fixed by (m, L), so ablations zero-fill
their block instead of shrinking the vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRecord, SizeMismatch

GO_SIZE = 12
DENOM_FLOOR = 1e-12


def corrcoef(cov: np.ndarray) -> np.ndarray:
    """Correlation matrix of a covariance matrix; degenerate diagonals floored."""
    d = np.maximum(np.diag(cov), DENOM_FLOOR)
    r = cov / np.sqrt(np.outer(d, d))
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def go_features(
    mean: np.ndarray,
    cov: np.ndarray,
    sigma: float,
    gbest: np.ndarray,
    f_gap_t: float,
    f_gap_prev: float,
    fes_remaining: int,
    max_fes: int,
    radius: float,
) -> np.ndarray:
    scaled_mean = mean / radius
    r = corrcoef(cov)
    scaled_best = gbest / radius
    gap_ratio = float(np.clip(f_gap_t / max(f_gap_prev, DENOM_FLOOR), 0.0, 1.0))
    return np.array(
        [
            scaled_mean.max(),
            scaled_mean.mean(),
            scaled_mean.min(),
            r.max(),
            r.mean(),
            r.min(),
            sigma / radius,
            scaled_best.max(),
            scaled_best.mean(),
            scaled_best.min(),
            gap_ratio,
            fes_remaining / max_fes,
        ]
    )


@dataclass
class SubgroupRecord:
    """What one subgroup's CMA-ES run left behind in a macro step."""

    subdims: np.ndarray
    first_points: np.ndarray   # (lam, d_sub), first generation
    last_points: np.ndarray    # (lam, d_sub), final generation
    all_points: np.ndarray     # (n_gens * lam, d_sub)
    cov_final: np.ndarray


def sd_features(
    records: list,
    lam: int,
    radius: float,
    diam: float,
) -> np.ndarray:
    """Four stacked blocks of m entries each: correlation, drift, spread, extent."""
    corr, drift, spread, extent = [], [], [], []
    for rec in records:
        if rec.all_points.shape[0] == 0:
            raise EmptyRecord("subgroup record holds no generations")
        corr.append(corrcoef(rec.cov_final).mean())
        delta = (rec.last_points - rec.first_points).sum(axis=0)
        drift.append(float(np.mean(delta / (lam * radius))))
        spread.append(float(np.mean(rec.all_points.var(axis=0) / radius ** 2)))
        pts = rec.last_points
        diff = pts[:, None, :] - pts[None, :, :]
        d_max = float(np.sqrt((diff ** 2).sum(axis=-1)).max())
        extent.append(d_max / diam)
    return np.array(corr + drift + spread + extent)


@dataclass
class ActionStats:
    """Per-action selection counts and accumulated deltas over an episode."""

    num: np.ndarray
    dr_sum: np.ndarray
    dg_sum: np.ndarray

    @classmethod
    def fresh(cls, n_actions: int) -> "ActionStats":
        return cls(
            num=np.zeros(n_actions, dtype=int),
            dr_sum=np.zeros(n_actions),
            dg_sum=np.zeros(n_actions),
        )

    def record(self, action: int, reward_delta: float, gbest_move: float) -> None:
        self.num[action] += 1
        self.dr_sum[action] += reward_delta
        self.dg_sum[action] += gbest_move


def ah_features(stats: ActionStats, radius: float) -> np.ndarray:
    n = np.maximum(stats.num, 1)
    taken = stats.num > 0
    avg_dr = np.where(taken, stats.dr_sum / n, 0.0)
    avg_dg = np.where(taken, stats.dg_sum / (2.0 * radius * n), 0.0)
    return np.concatenate([avg_dr, avg_dg])


def assemble_state(
    go: np.ndarray,
    sd: np.ndarray,
    ah: np.ndarray,
    m: int,
    n_actions: int,
    ablation: str | None = None,
) -> np.ndarray:
    if go.shape != (GO_SIZE,):
        raise SizeMismatch(f"go block has shape {go.shape}, expected ({GO_SIZE},)")
    if sd.shape != (4 * m,):
        raise SizeMismatch(f"sd block has shape {sd.shape}, expected ({4 * m},)")
    if ah.shape != (2 * n_actions,):
        raise SizeMismatch(f"ah block has shape {ah.shape}, expected ({2 * n_actions},)")
    if ablation == "go":
        go = np.zeros_like(go)
    elif ablation == "sd":
        sd = np.zeros_like(sd)
    elif ablation == "ah":
        ah = np.zeros_like(ah)
    elif ablation not in (None, "none"):
        raise ValueError(f"unknown ablation flag {ablation!r}")
    return np.concatenate([go, sd, ah])


def state_size(m: int, n_actions: int) -> int:
    return GO_SIZE + 4 * m + 2 * n_actions


def reward(
    f_prev: float,
    f_cur: float,
    f0: float,
    f_star: float,
    variant: str = "main",
) -> float:
    """Per-step reward on optimum-gap values; denominators floored at 1e-12."""
    g_prev = f_prev - f_star
    g_cur = f_cur - f_star
    g0 = f0 - f_star
    if variant == "main":
        return (g_prev - g_cur) / max(g0, DENOM_FLOOR)
    if variant == "r1":
        return (g0 - g_cur) / max(g0, DENOM_FLOOR)
    if variant == "r2":
        return (g_prev - g_cur) / max(g_prev, DENOM_FLOOR)
    raise ValueError(f"unknown reward variant {variant!r}")
