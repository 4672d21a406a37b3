"""Clipped-surrogate policy optimization over collected trajectories.

Advantages are G - critic(s) with the critic frozen before the inner loop;
gradients are exact reverse accumulation through the policy module's trunks,
and both networks take K adaptive-moment steps per epoch on full batches.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import policy
from .errors import NonFiniteGradient, NonFiniteLoss
from .policy import MlpParams


@dataclass
class Trajectory:
    states: np.ndarray        # (T, in_width)
    actions: np.ndarray       # (T,) int
    logprobs_old: np.ndarray  # (T,)
    rewards: np.ndarray       # (T,)
    terminal: bool = True

    def __post_init__(self):
        if len(self.rewards) == 0:
            raise ValueError("trajectory must hold at least one step")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("trajectory rewards must be finite")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, layers: list) -> "AdamState":
        return cls(
            m=[(np.zeros_like(w), np.zeros_like(b)) for w, b in layers],
            v=[(np.zeros_like(w), np.zeros_like(b)) for w, b in layers],
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m=[(mw.copy(), mb.copy()) for mw, mb in self.m],
            v=[(vw.copy(), vb.copy()) for vw, vb in self.v],
            t=self.t,
        )


@dataclass
class OptState:
    actor: AdamState
    critic: AdamState


@dataclass
class TrainConfig:
    gamma: float = 0.99
    clip_eps: float = 0.2
    k_iters: int = 3
    lr: float = 6e-4
    adv_norm: bool = False
    opt: OptState | None = None


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=float)
    returns = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        returns[t] = acc
    return returns


def _check_finite_loss(value: float) -> float:
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss evaluated to {value}")
    return float(value)


def _check_finite_grads(grads: list) -> list:
    for gw, gb in grads:
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NonFiniteGradient("gradient contains NaN or inf")
    return grads


def actor_loss_and_grad(
    actor_layers: list,
    states: np.ndarray,
    actions: np.ndarray,
    logprobs_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
):
    """Negated clipped surrogate and its gradient w.r.t. the actor layers."""
    n = len(actions)
    logits, cache = policy.forward_batch(actor_layers, states)
    log_probs = policy.log_softmax_rows(logits)
    rows = np.arange(n)
    lp_new = log_probs[rows, actions]
    eta = np.exp(lp_new - logprobs_old)
    unclipped = eta * advantages
    clipped = np.clip(eta, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    loss = _check_finite_loss(-np.mean(np.minimum(unclipped, clipped)))

    # d surrogate / d eta is zero whenever the clipped branch is active
    active = unclipped <= clipped
    coeff = np.where(active, advantages * eta, 0.0) * (-1.0 / n)
    probs = np.exp(log_probs)
    d_logits = -coeff[:, None] * probs
    d_logits[rows, actions] += coeff
    grads = _check_finite_grads(policy.backward_batch(actor_layers, cache, d_logits))
    return loss, grads


def critic_loss_and_grad(critic_layers: list, states: np.ndarray, returns: np.ndarray):
    n = len(returns)
    values, cache = policy.forward_batch(critic_layers, states)
    diff = values[:, 0] - returns
    loss = _check_finite_loss(np.mean(diff * diff))
    d_values = (2.0 / n) * diff[:, None]
    grads = _check_finite_grads(policy.backward_batch(critic_layers, cache, d_values))
    return loss, grads


def ppo_actor_loss(
    params: MlpParams,
    trajectory: Trajectory,
    advantages: np.ndarray,
    clip_eps: float,
) -> float:
    loss, _ = actor_loss_and_grad(
        params.actor,
        trajectory.states,
        trajectory.actions,
        trajectory.logprobs_old,
        advantages,
        clip_eps,
    )
    return loss


def critic_loss(params: MlpParams, trajectory: Trajectory, returns: np.ndarray) -> float:
    loss, _ = critic_loss_and_grad(params.critic, trajectory.states, returns)
    return loss


def adam_step(
    layers: list,
    grads: list,
    opt: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> list:
    opt.t += 1
    corr1 = 1.0 - beta1 ** opt.t
    corr2 = 1.0 - beta2 ** opt.t
    new_layers = []
    for i, ((w, b), (gw, gb)) in enumerate(zip(layers, grads)):
        mw, mb = opt.m[i]
        vw, vb = opt.v[i]
        mw[:] = beta1 * mw + (1.0 - beta1) * gw
        mb[:] = beta1 * mb + (1.0 - beta1) * gb
        vw[:] = beta2 * vw + (1.0 - beta2) * gw * gw
        vb[:] = beta2 * vb + (1.0 - beta2) * gb * gb
        w = w - lr * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
        b = b - lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
        new_layers.append((w, b))
    return new_layers


def _concat_batch(trajectories: list, gamma: float):
    states = np.concatenate([t.states for t in trajectories])
    actions = np.concatenate([t.actions for t in trajectories]).astype(int)
    logp_old = np.concatenate([t.logprobs_old for t in trajectories])
    returns = np.concatenate(
        [discounted_returns(t.rewards, gamma) for t in trajectories]
    )
    return states, actions, logp_old, returns


def train_epoch(params: MlpParams, trajectories: list, config: TrainConfig):
    """K clipped-surrogate steps on actor and critic; returns (params', metrics)."""
    if not trajectories:
        raise ValueError("train_epoch needs at least one trajectory")
    states, actions, logp_old, returns = _concat_batch(trajectories, config.gamma)

    values, _ = policy.forward_batch(params.critic, states)
    advantages = returns - values[:, 0]
    if config.adv_norm:
        advantages = (advantages - advantages.mean()) / max(advantages.std(), 1e-8)

    logits, _ = policy.forward_batch(params.actor, states)
    log_probs = policy.log_softmax_rows(logits)
    probs = np.exp(log_probs)
    entropy = float(np.mean(-np.sum(probs * log_probs, axis=1)))

    if config.opt is None:
        config.opt = OptState(
            actor=AdamState.zeros_like(params.actor),
            critic=AdamState.zeros_like(params.critic),
        )
    opt_backup = OptState(actor=config.opt.actor.copy(), critic=config.opt.critic.copy())

    actor_layers = policy.copy_layers(params.actor)
    critic_layers = policy.copy_layers(params.critic)
    entry_actor_loss = entry_critic_loss = None
    try:
        for _ in range(config.k_iters):
            a_loss, a_grads = actor_loss_and_grad(
                actor_layers, states, actions, logp_old, advantages, config.clip_eps
            )
            c_loss, c_grads = critic_loss_and_grad(critic_layers, states, returns)
            if entry_actor_loss is None:
                entry_actor_loss, entry_critic_loss = a_loss, c_loss
            actor_layers = adam_step(actor_layers, a_grads, config.opt.actor, config.lr)
            critic_layers = adam_step(critic_layers, c_grads, config.opt.critic, config.lr)
    except (NonFiniteLoss, NonFiniteGradient):
        config.opt = opt_backup
        raise

    if entry_actor_loss is None:  # K = 0: report losses without updating
        entry_actor_loss, _ = actor_loss_and_grad(
            actor_layers, states, actions, logp_old, advantages, config.clip_eps
        )
        entry_critic_loss, _ = critic_loss_and_grad(critic_layers, states, returns)

    new_params = MlpParams(
        actor=actor_layers,
        critic=critic_layers,
        in_width=params.in_width,
        n_actions=params.n_actions,
    )
    metrics = {
        "actor_loss": entry_actor_loss,
        "critic_loss": entry_critic_loss,
        "entropy": entropy,
        "mean_advantage": float(advantages.mean()),
    }
    return new_params, metrics
