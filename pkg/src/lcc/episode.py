"""One training/evaluation episode: ns strategy decisions over one problem.

Each step: build the state vector, pick a decomposition strategy, split the
dimensions, advance every subgroup with its own CMA-ES for TG generations
inside a frozen full-dimensional context, write the blocks back, and pay the
step's reward. Function evaluations are charged to one shared budget whose
total is exactly TG*lam*m*ns (the initial population is absorbed by the final
step, which simply runs out one generation early).
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import cmaes, decomposition, features, policy, problems
from .config import N_ACTIONS, RunConfig
from .ppo import Trajectory

RANDOM_POLICY = "random"


@dataclass
class StepRecord:
    action: int
    reward: float
    best_gap: float
    fes_used: int
    state_digest: str
    wall_ms: int = 0


@dataclass
class EpisodeLog:
    steps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    f0_gap: float = 0.0
    final_gap: float = 0.0
    total_fes: int = 0
    early_stopped: bool = False
    fes_by_phase: dict = field(default_factory=dict)


def _digest(state: np.ndarray) -> str:
    return hashlib.blake2b(state.tobytes(), digest_size=8).hexdigest()


def _run_subgroup(
    problem,
    budget,
    subdims,
    cov_sub,
    mean_sub,
    sigma0,
    context,
    cfg: RunConfig,
    rng,
    gbest,
    gbest_f,
):
    """TG generations of CMA-ES on one subgroup inside the frozen context."""
    state = cmaes.init(
        len(subdims), mean_sub, sigma0, cfg.lam,
        sigma_max=(problem.upper - problem.lower) / 2.0,
    )
    state.cov = cov_sub
    first = last = None
    all_points = []
    for _ in range(cfg.tg):
        if budget.remaining < cfg.lam:
            break
        off = cmaes.sample(state, rng)
        pts = np.clip(off.points, problem.lower, problem.upper)
        full = np.tile(context, (cfg.lam, 1))
        full[:, subdims] = pts
        fits = problems.evaluate_batch(problem, full, budget)
        i = int(np.argmin(fits))
        if fits[i] < gbest_f:
            gbest_f = float(fits[i])
            gbest = full[i].copy()
        state = cmaes.update(state, cmaes.Offspring(points=pts, fitnesses=fits))
        if first is None:
            first = pts
        last = pts
        all_points.append(pts)
    record = None
    if all_points:
        record = features.SubgroupRecord(
            subdims=subdims,
            first_points=first,
            last_points=last,
            all_points=np.concatenate(all_points),
            cov_final=state.cov,
        )
    return state, record, gbest, gbest_f


def run_episode(
    problem,
    params,
    cfg: RunConfig,
    rng: np.random.Generator,
    action_override=None,
):
    """Play one episode; returns (Trajectory, EpisodeLog).

    `action_override` may be RANDOM_POLICY (uniform strategy per step) or a
    fixed strategy index; `params` may then be None.
    """
    if problem.dim != cfg.dim:
        raise ValueError(f"problem dim {problem.dim} != config dim {cfg.dim}")
    radius = problems.radius(problem)
    diam = problems.diameter(problem)
    budget = problems.EvalBudget(cfg.max_fes)

    budget.phase = "init"
    mean = rng.uniform(problem.lower, problem.upper, cfg.dim)
    init_pts = rng.uniform(problem.lower, problem.upper, (cfg.lam, cfg.dim))
    init_fits = problems.evaluate_batch(problem, init_pts, budget)
    best_i = int(np.argmin(init_fits))
    gbest = init_pts[best_i].copy()
    gbest_f = float(init_fits[best_i])

    cov = np.eye(cfg.dim)
    sigma = radius
    f0 = gbest_f
    f0_gap = f0 - problem.f_star
    gap_hist = [f0_gap]
    stats = features.ActionStats.fresh(N_ACTIONS)
    records = None
    prev_reward = 0.0
    prev_gbest = gbest.copy()

    states, actions, logprobs, rewards = [], [], [], []
    log = EpisodeLog(f0_gap=f0_gap)

    for _step in range(cfg.ns):
        if budget.remaining < cfg.lam:
            break  # budget exhausted: normal termination
        t_start = time.perf_counter() if cfg.timing else 0.0

        go = features.go_features(
            mean, cov, sigma, gbest,
            f_gap_t=gap_hist[-1],
            f_gap_prev=gap_hist[-2] if len(gap_hist) > 1 else gap_hist[-1],
            fes_remaining=budget.remaining,
            max_fes=cfg.max_fes,
            radius=radius,
        )
        if records is None:
            sd = np.zeros(4 * cfg.m)
        else:
            sd = features.sd_features(records, cfg.lam, radius, diam)
        ah = features.ah_features(stats, radius)
        state_vec = features.assemble_state(
            go, sd, ah, cfg.m, N_ACTIONS,
            ablation=None if cfg.ablation == "none" else cfg.ablation,
        )

        if action_override is None:
            probs = policy.actor_forward(params, state_vec)
            action, logprob = policy.sample_action(
                probs, rng, greedy=cfg.policy_mode == "greedy"
            )
        elif action_override == RANDOM_POLICY:
            action = int(rng.integers(N_ACTIONS))
            logprob = float(np.log(1.0 / N_ACTIONS))
        else:
            action = int(action_override)
            logprob = 0.0

        budget.phase = "decompose"
        part = decomposition.build(action, np.diag(cov), cfg.m, rng)
        budget.phase = "optimize"

        f_prev = gbest_f
        context = gbest.copy()
        new_cov = cov.copy()
        new_mean = mean.copy()
        sigmas = []
        records = []
        for subdims in part.groups:
            cov_sub, mean_sub = cmaes.extract_sub(cov, mean, subdims)
            # stale cross-group terms can make the raw block indefinite
            cov_sub = cmaes.repair_psd(cov_sub)
            sub_state, record, gbest, gbest_f = _run_subgroup(
                problem, budget, subdims, cov_sub, mean_sub, sigma,
                context, cfg, rng, gbest, gbest_f,
            )
            new_cov, new_mean = cmaes.writeback_sub(
                new_cov, new_mean, subdims, sub_state.cov, sub_state.mean
            )
            sigmas.append(sub_state.sigma)
            if record is not None:
                records.append(record)
        cov, mean = new_cov, new_mean
        sigma = float(
            np.clip(np.exp(np.mean(np.log(sigmas))), cmaes.SIGMA_FLOOR, radius)
        )

        step_reward = features.reward(
            f_prev, gbest_f, f0, problem.f_star, cfg.reward_variant
        )
        stats.record(
            action,
            step_reward - prev_reward,
            float(np.linalg.norm(gbest - prev_gbest)),
        )
        prev_reward = step_reward
        prev_gbest = gbest.copy()
        gap = gbest_f - problem.f_star
        gap_hist.append(gap)

        states.append(state_vec)
        actions.append(action)
        logprobs.append(logprob)
        rewards.append(step_reward)
        # wall_ms stays 0 unless timing is on, keeping logs byte-reproducible
        wall_ms = (
            int(round((time.perf_counter() - t_start) * 1000.0)) if cfg.timing else 0
        )
        log.states.append(state_vec)
        log.steps.append(
            StepRecord(
                action=action,
                reward=step_reward,
                best_gap=gap,
                fes_used=budget.used,
                state_digest=_digest(state_vec),
                wall_ms=wall_ms,
            )
        )
        # a non-finite threshold disables early stopping entirely
        if np.isfinite(cfg.termination_error) and gap < cfg.termination_error:
            log.early_stopped = True
            break

    log.final_gap = gap_hist[-1]
    log.total_fes = budget.used
    log.fes_by_phase = dict(budget.by_phase)
    traj = Trajectory(
        states=np.array(states),
        actions=np.array(actions, dtype=int),
        logprobs_old=np.array(logprobs),
        rewards=np.array(rewards),
        terminal=True,
    )
    return traj, log


def run_full_cmaes(
    problem,
    cfg: RunConfig,
    rng: np.random.Generator,
    diagonal: bool = False,
):
    """Budget-parity monolithic baseline on the full dimension."""
    radius = problems.radius(problem)
    budget = problems.EvalBudget(cfg.max_fes)
    budget.phase = "init"
    mean = rng.uniform(problem.lower, problem.upper, cfg.dim)
    init_pts = rng.uniform(problem.lower, problem.upper, (cfg.lam, cfg.dim))
    init_fits = problems.evaluate_batch(problem, init_pts, budget)
    best_i = int(np.argmin(init_fits))
    gbest_f = float(init_fits[best_i])

    budget.phase = "optimize"
    state = cmaes.init(cfg.dim, mean, radius, cfg.lam, sigma_max=radius)
    step = cmaes.diag_update if diagonal else cmaes.update
    while budget.remaining >= cfg.lam:
        if (
            np.isfinite(cfg.termination_error)
            and gbest_f - problem.f_star < cfg.termination_error
        ):
            break
        off = cmaes.sample(state, rng)
        pts = np.clip(off.points, problem.lower, problem.upper)
        fits = problems.evaluate_batch(problem, pts, budget)
        i = int(np.argmin(fits))
        if fits[i] < gbest_f:
            gbest_f = float(fits[i])
        state = step(state, cmaes.Offspring(points=pts, fitnesses=fits))
    return gbest_f - problem.f_star, budget.used
