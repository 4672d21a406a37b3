"""Covariance matrix adaptation evolution strategy, written against plain numpy.

Carries the usual machinery: rank-one + rank-mu covariance update, cumulative
step-size adaptation, log-linear recombination weights. States are plain
dataclasses; `update` returns a fresh state so callers can keep or discard
intermediate generations freely.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    FactorizationFailure,
    IndexOutOfRange,
    NonFiniteFitness,
    ShapeMismatch,
)

SIGMA_FLOOR = 1e-12


@dataclass
class CmaState:
    dim: int
    mean: np.ndarray
    cov: np.ndarray
    sigma: float
    p_sigma: np.ndarray
    p_cov: np.ndarray
    generation: int
    lam: int
    weights: np.ndarray
    mu: int
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_cov: float
    c_one: float
    c_mu: float
    chi_n: float
    sigma_max: float


@dataclass
class Offspring:
    points: np.ndarray      # (lam, dim)
    fitnesses: np.ndarray   # (lam,)


def init(
    dim: int,
    mean: np.ndarray,
    sigma0: float,
    lam: int,
    sigma_max: float = np.inf,
) -> CmaState:
    """Fresh state: identity covariance, zero paths, standard constants."""
    if lam < 2:
        raise ValueError(f"population size must be >= 2, got {lam}")
    if sigma0 <= 0.0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    mean = np.asarray(mean, dtype=float).copy()
    if mean.shape != (dim,):
        raise ShapeMismatch(f"mean has shape {mean.shape}, expected ({dim},)")

    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w = w / w.sum()
    mu_eff = 1.0 / np.sum(w * w)
    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, np.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    c_cov = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    c_one = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(
        1.0 - c_one,
        2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff),
    )
    chi_n = np.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim ** 2))

    return CmaState(
        dim=dim,
        mean=mean,
        cov=np.eye(dim),
        sigma=float(sigma0),
        p_sigma=np.zeros(dim),
        p_cov=np.zeros(dim),
        generation=0,
        lam=lam,
        weights=w,
        mu=mu,
        mu_eff=float(mu_eff),
        c_sigma=float(c_sigma),
        d_sigma=float(d_sigma),
        c_cov=float(c_cov),
        c_one=float(c_one),
        c_mu=float(c_mu),
        chi_n=float(chi_n),
        sigma_max=float(sigma_max),
    )


def _chol_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + SIGMA_FLOOR * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure("covariance not factorizable after jitter") from exc


def sample(state: CmaState, rng: np.random.Generator) -> Offspring:
    """Draw lam points from N(mean, sigma^2 C); fitnesses start as NaN."""
    a = _chol_factor(state.cov)
    z = rng.standard_normal((state.lam, state.dim))
    points = state.mean + state.sigma * (z @ a.T)
    return Offspring(points=points, fitnesses=np.full(state.lam, np.nan))


def _inv_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, 1e-20)
    return (vecs / np.sqrt(vals)) @ vecs.T


def update(state: CmaState, offspring: Offspring) -> CmaState:
    """One generation: rank offspring, move mean, adapt paths, C and sigma."""
    points = np.asarray(offspring.points, dtype=float)
    fits = np.asarray(offspring.fitnesses, dtype=float)
    if points.shape != (state.lam, state.dim) or fits.shape != (state.lam,):
        raise ShapeMismatch(
            f"offspring shapes {points.shape}/{fits.shape} do not match "
            f"(lam={state.lam}, dim={state.dim})"
        )
    if not np.all(np.isfinite(fits)):
        raise NonFiniteFitness("offspring fitnesses contain NaN or inf")

    order = np.argsort(fits, kind="stable")
    elite = points[order[: state.mu]]
    old_mean = state.mean
    new_mean = state.weights @ elite
    y_w = (new_mean - old_mean) / state.sigma

    c_s, d_s = state.c_sigma, state.d_sigma
    p_sigma = (1.0 - c_s) * state.p_sigma + np.sqrt(
        c_s * (2.0 - c_s) * state.mu_eff
    ) * (_inv_sqrt(state.cov) @ y_w)
    ps_norm = float(np.linalg.norm(p_sigma))

    gen = state.generation + 1
    h_sig = float(
        ps_norm / np.sqrt(1.0 - (1.0 - c_s) ** (2 * gen)) / state.chi_n
        < 1.4 + 2.0 / (state.dim + 1.0)
    )
    c_c = state.c_cov
    p_cov = (1.0 - c_c) * state.p_cov + h_sig * np.sqrt(
        c_c * (2.0 - c_c) * state.mu_eff
    ) * y_w

    ys = (elite - old_mean) / state.sigma
    rank_mu = ys.T @ (state.weights[:, None] * ys)
    delta_h = (1.0 - h_sig) * c_c * (2.0 - c_c)
    cov = (
        (1.0 - state.c_one - state.c_mu) * state.cov
        + state.c_one * (np.outer(p_cov, p_cov) + delta_h * state.cov)
        + state.c_mu * rank_mu
    )
    cov = (cov + cov.T) / 2.0

    sigma = state.sigma * np.exp((c_s / d_s) * (ps_norm / state.chi_n - 1.0))
    sigma = float(np.clip(sigma, SIGMA_FLOOR, state.sigma_max))

    return replace(
        state,
        mean=new_mean,
        cov=cov,
        sigma=sigma,
        p_sigma=p_sigma,
        p_cov=p_cov,
        generation=gen,
    )


def diag_update(state: CmaState, offspring: Offspring) -> CmaState:
    """Separable variant: identical update with off-diagonal terms zeroed."""
    new = update(state, offspring)
    new.cov = np.diag(np.diag(new.cov))
    return new


def repair_psd(cov: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone by flooring eigenvalues.

    Block write-back under changing partitions leaves cross-group entries
    stale, so a later principal submatrix can carry genuinely negative
    eigenvalues; those directions get ~zero variance instead of breaking
    the sampling factorization. Matrices already PSD pass through unchanged.
    """
    vals, vecs = np.linalg.eigh(cov)
    floor = 1e-12 * max(float(vals[-1]), 1.0)
    if vals[0] >= floor:
        return cov
    clipped = np.maximum(vals, floor)
    out = (vecs * clipped) @ vecs.T
    return (out + out.T) / 2.0


def _check_subdims(dim: int, subdims: np.ndarray) -> np.ndarray:
    subdims = np.asarray(subdims, dtype=int)
    if subdims.ndim != 1 or subdims.size == 0:
        raise ShapeMismatch("subdims must be a non-empty index vector")
    if subdims.min() < 0 or subdims.max() >= dim:
        raise IndexOutOfRange(f"subdims outside [0, {dim})")
    if np.unique(subdims).size != subdims.size:
        raise IndexOutOfRange("subdims contain duplicates")
    return subdims


def extract_sub(cov: np.ndarray, mean: np.ndarray, subdims: np.ndarray):
    """Private copies of the covariance block and mean slice for a subgroup."""
    subdims = _check_subdims(len(mean), subdims)
    return cov[np.ix_(subdims, subdims)].copy(), mean[subdims].copy()


def writeback_sub(
    cov: np.ndarray,
    mean: np.ndarray,
    subdims: np.ndarray,
    cov_sub: np.ndarray,
    mean_sub: np.ndarray,
):
    """Write a subgroup block back; cross-covariances are left untouched."""
    subdims = _check_subdims(len(mean), subdims)
    k = subdims.size
    if cov_sub.shape != (k, k) or mean_sub.shape != (k,):
        raise ShapeMismatch("subgroup block shapes do not match subdims")
    new_cov = cov.copy()
    new_mean = mean.copy()
    new_cov[np.ix_(subdims, subdims)] = cov_sub
    new_mean[subdims] = mean_sub
    return new_cov, new_mean


def run(
    fn_batch,
    state: CmaState,
    rng: np.random.Generator,
    max_evals: int,
    bounds=None,
    tol: float | None = None,
    diagonal: bool = False,
):
    """Generation loop helper: returns (state, best_x, best_f, evals_used).

    `fn_batch` maps an (n, dim) array to n fitnesses. Points are clamped to
    `bounds` before evaluation when given; the sampling distribution itself is
    never truncated. Stops when fewer than lam evaluations remain.
    """
    step = diag_update if diagonal else update
    best_x, best_f = None, np.inf
    evals = 0
    while evals + state.lam <= max_evals:
        off = sample(state, rng)
        pts = off.points
        if bounds is not None:
            pts = np.clip(pts, bounds[0], bounds[1])
        fits = np.asarray(fn_batch(pts), dtype=float)
        evals += state.lam
        i = int(np.argmin(fits))
        if fits[i] < best_f:
            best_f, best_x = float(fits[i]), pts[i].copy()
        state = step(state, Offspring(points=pts, fitnesses=fits))
        if tol is not None and best_f < tol:
            break
    return state, best_x, best_f, evals
