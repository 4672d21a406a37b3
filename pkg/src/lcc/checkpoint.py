"""Versioned binary checkpoints for the actor-critic and optimizer state.

Layout (little-endian):
  magic "LCC1" | version u32 | config fingerprint u64 | m u32 | L u32 |
  in_width u32 | epoch u64 | seed u64 | actor_t u64 | critic_t u64 |
  n_actor u64 | n_critic u64 | actor params f64[] | critic params f64[] |
  actor Adam m/v f64[] | critic Adam m/v f64[] | blake2b-64 checksum u64

Parameters are flattened in fixed layer order (W then b per layer).
"""
from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointIoError, ChecksumMismatch, ConfigMismatch, VersionMismatch
from .policy import HIDDEN, MlpParams, param_count
from .ppo import AdamState, OptState

MAGIC = b"LCC1"
VERSION = 1
_HEADER = struct.Struct("<4sIQIIIQQQQQQ")


@dataclass
class Checkpoint:
    fingerprint: int
    m: int
    n_actions: int
    in_width: int
    epoch: int
    seed: int
    params: MlpParams
    opt: OptState
    version: int = VERSION


def _layer_sizes(in_width: int, out_width: int):
    sizes = (in_width, *HIDDEN, out_width)
    return list(zip(sizes, sizes[1:]))


def _flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def _unflatten(vec: np.ndarray, in_width: int, out_width: int):
    layers = []
    pos = 0
    for fan_in, fan_out in _layer_sizes(in_width, out_width):
        w = vec[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out).copy()
        pos += fan_in * fan_out
        b = vec[pos:pos + fan_out].copy()
        pos += fan_out
        layers.append((w, b))
    if pos != vec.size:
        raise ConfigMismatch("parameter payload does not match the layer layout")
    return layers


def _adam_to_vec(state: AdamState) -> np.ndarray:
    return np.concatenate([_flatten(state.m), _flatten(state.v)])


def _adam_from_vec(vec: np.ndarray, in_width: int, out_width: int, t: int) -> AdamState:
    half = vec.size // 2
    return AdamState(
        m=_unflatten(vec[:half], in_width, out_width),
        v=_unflatten(vec[half:], in_width, out_width),
        t=t,
    )


def _checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def to_bytes(ckpt: Checkpoint) -> bytes:
    actor_vec = _flatten(ckpt.params.actor)
    critic_vec = _flatten(ckpt.params.critic)
    head = _HEADER.pack(
        MAGIC,
        ckpt.version,
        ckpt.fingerprint,
        ckpt.m,
        ckpt.n_actions,
        ckpt.in_width,
        ckpt.epoch,
        ckpt.seed,
        ckpt.opt.actor.t,
        ckpt.opt.critic.t,
        actor_vec.size,
        critic_vec.size,
    )
    body = b"".join(
        arr.astype("<f8").tobytes()
        for arr in (
            actor_vec,
            critic_vec,
            _adam_to_vec(ckpt.opt.actor),
            _adam_to_vec(ckpt.opt.critic),
        )
    )
    payload = head + body
    return payload + struct.pack("<Q", _checksum(payload))


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < _HEADER.size + 8:
        raise ChecksumMismatch("file shorter than a checkpoint header")
    magic, version = struct.unpack_from("<4sI", raw, 0)
    if magic != MAGIC or version != VERSION:
        raise VersionMismatch(
            f"magic/version {magic!r}/{version} not supported (expect {MAGIC!r}/{VERSION})"
        )
    payload, tail = raw[:-8], raw[-8:]
    if _checksum(payload) != struct.unpack("<Q", tail)[0]:
        raise ChecksumMismatch("trailing checksum does not match file contents")
    (
        _magic,
        _version,
        fp,
        m,
        n_actions,
        in_width,
        epoch,
        seed,
        actor_t,
        critic_t,
        n_actor,
        n_critic,
    ) = _HEADER.unpack_from(raw, 0)

    floats = np.frombuffer(payload[_HEADER.size:], dtype="<f8")
    if floats.size != 3 * (n_actor + n_critic):
        raise ConfigMismatch("float payload size disagrees with parameter counts")
    a_end = n_actor
    c_end = a_end + n_critic
    am_end = c_end + 2 * n_actor
    params = MlpParams(
        actor=_unflatten(floats[:a_end], in_width, n_actions),
        critic=_unflatten(floats[a_end:c_end], in_width, 1),
        in_width=in_width,
        n_actions=n_actions,
    )
    opt = OptState(
        actor=_adam_from_vec(floats[c_end:am_end], in_width, n_actions, actor_t),
        critic=_adam_from_vec(floats[am_end:], in_width, 1, critic_t),
    )
    if param_count(params.actor) != n_actor or param_count(params.critic) != n_critic:
        raise ConfigMismatch("parameter counts disagree with network shape")
    return Checkpoint(
        fingerprint=fp,
        m=m,
        n_actions=n_actions,
        in_width=in_width,
        epoch=epoch,
        seed=seed,
        params=params,
        opt=opt,
        version=version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    data = to_bytes(ckpt)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointIoError(f"cannot write checkpoint to {path}: {exc}") from exc


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointIoError(f"cannot read checkpoint from {path}: {exc}") from exc
    return from_bytes(raw)
