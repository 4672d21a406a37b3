"""Actor and critic MLPs with hand-rolled forward/backward passes.

Both networks share the trunk shape in -> 64 -> 64 -> out with ReLU between
affine layers; the actor adds a softmax head, the critic emits one scalar.
Parameters live in parallel lists of (W, b) pairs so the optimizer and the
checkpoint writer can walk them in a fixed order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistribution, SizeMismatch

HIDDEN = (64, 64)


@dataclass
class MlpParams:
    actor: list    # [(W, b), ...] for in -> hidden -> ... -> n_actions
    critic: list   # same trunk, output width 1
    in_width: int
    n_actions: int


def _init_layers(rng: np.random.Generator, sizes) -> list:
    layers = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        scale = np.sqrt(1.0 / fan_in)
        w = rng.uniform(-scale, scale, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return layers


def init_params(
    rng: np.random.Generator,
    in_width: int,
    n_actions: int,
    hidden=HIDDEN,
) -> MlpParams:
    if in_width < 1 or n_actions < 1 or any(h < 1 for h in hidden):
        raise ValueError("network widths must be positive")
    actor = _init_layers(rng, (in_width, *hidden, n_actions))
    critic = _init_layers(rng, (in_width, *hidden, 1))
    return MlpParams(actor=actor, critic=critic, in_width=in_width, n_actions=n_actions)


def param_count(layers: list) -> int:
    return sum(w.size + b.size for w, b in layers)


def copy_layers(layers: list) -> list:
    return [(w.copy(), b.copy()) for w, b in layers]


def forward_batch(layers: list, x: np.ndarray):
    """Run the trunk on an (n, in) batch; returns (output, cache for backward)."""
    cache = []
    for i, (w, b) in enumerate(layers):
        z = x @ w + b
        cache.append((x, z))
        x = np.maximum(z, 0.0) if i < len(layers) - 1 else z
    return x, cache


def backward_batch(layers: list, cache: list, grad_out: np.ndarray) -> list:
    """Reverse accumulation through the trunk; ReLU at 0 takes the 0 branch."""
    grads = [None] * len(layers)
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        x, z = cache[i]
        if i < len(layers) - 1:
            g = g * (z > 0.0)
        grads[i] = (x.T @ g, g.sum(axis=0))
        g = g @ layers[i][0].T
    return grads


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_state(params: MlpParams, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape != (params.in_width,):
        raise SizeMismatch(
            f"state has shape {state.shape}, network input width is {params.in_width}"
        )
    return state


def actor_forward(params: MlpParams, state: np.ndarray) -> np.ndarray:
    """Action probabilities for one state."""
    state = _check_state(params, state)
    logits, _ = forward_batch(params.actor, state[None, :])
    return softmax_rows(logits)[0]


def critic_forward(params: MlpParams, state: np.ndarray) -> float:
    state = _check_state(params, state)
    out, _ = forward_batch(params.critic, state[None, :])
    return float(out[0, 0])


def sample_action(
    probs: np.ndarray,
    rng: np.random.Generator,
    greedy: bool = False,
):
    """Draw an action index and its log probability."""
    probs = np.asarray(probs, dtype=float)
    if not np.all(np.isfinite(probs)) or abs(probs.sum() - 1.0) > 1e-6:
        raise DegenerateDistribution(f"invalid action probabilities {probs}")
    if greedy:
        a = int(np.argmax(probs))
    else:
        u = rng.random()
        a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        a = min(a, len(probs) - 1)
    logprob = float(np.log(max(probs[a], 1e-300)))
    return a, logprob
