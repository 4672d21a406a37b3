import struct

import numpy as np
import pytest

from lcc import checkpoint as ck
from lcc import policy
from lcc.config import N_ACTIONS, RunConfig, fingerprint
from lcc.errors import CheckpointIoError, ChecksumMismatch, VersionMismatch
from lcc.harness import make_checkpoint
from lcc.ppo import AdamState, OptState

IN = 38


def _fresh(seed=0, epoch=7):
    cfg = RunConfig()
    params = policy.init_params(np.random.default_rng(seed), IN, N_ACTIONS)
    opt = OptState(
        actor=AdamState.zeros_like(params.actor),
        critic=AdamState.zeros_like(params.critic),
    )
    # nonzero moments so the round trip exercises the optimizer section too
    rng = np.random.default_rng(seed + 1)
    for mw, mb in opt.actor.m:
        mw += rng.standard_normal(mw.shape)
        mb += rng.standard_normal(mb.shape)
    opt.actor.t = 12
    opt.critic.t = 12
    return ck.Checkpoint(
        fingerprint=fingerprint(cfg),
        m=cfg.m,
        n_actions=N_ACTIONS,
        in_width=IN,
        epoch=epoch,
        seed=seed,
        params=params,
        opt=opt,
    )


def _layers_equal(a, b):
    return all(
        np.array_equal(wa, wb) and np.array_equal(ba, bb)
        for (wa, ba), (wb, bb) in zip(a, b)
    )


def test_roundtrip_bytes_bit_identical():
    c = _fresh()
    raw = ck.to_bytes(c)
    c2 = ck.from_bytes(raw)
    assert ck.to_bytes(c2) == raw
    assert (c2.fingerprint, c2.m, c2.n_actions, c2.in_width) == (
        c.fingerprint, c.m, c.n_actions, c.in_width)
    assert (c2.epoch, c2.seed, c2.version) == (c.epoch, c.seed, c.version)
    assert _layers_equal(c2.params.actor, c.params.actor)
    assert _layers_equal(c2.params.critic, c.params.critic)
    assert _layers_equal(c2.opt.actor.m, c.opt.actor.m)
    assert _layers_equal(c2.opt.actor.v, c.opt.actor.v)
    assert c2.opt.actor.t == 12 and c2.opt.critic.t == 12


def test_file_roundtrip(tmp_path):
    c = _fresh()
    path = str(tmp_path / "c.bin")
    ck.save_checkpoint(c, path)
    c2 = ck.load_checkpoint(path)
    assert ck.to_bytes(c2) == ck.to_bytes(c)


def test_roundtrip_preserves_forward_outputs(tmp_path):
    c = _fresh(seed=3)
    path = str(tmp_path / "c.bin")
    ck.save_checkpoint(c, path)
    c2 = ck.load_checkpoint(path)
    rng = np.random.default_rng(9)
    for _ in range(100):
        x = rng.standard_normal(IN)
        assert np.array_equal(
            policy.actor_forward(c.params, x), policy.actor_forward(c2.params, x)
        )
        assert policy.critic_forward(c.params, x) == policy.critic_forward(c2.params, x)


def test_truncated_file_rejected(tmp_path):
    raw = ck.to_bytes(_fresh())
    for cut in (len(raw) - 1, len(raw) // 2, 10):
        with pytest.raises(ChecksumMismatch):
            ck.from_bytes(raw[:cut])


def test_version_bump_rejected():
    raw = bytearray(ck.to_bytes(_fresh()))
    # version u32 sits right after the 4-byte magic
    struct.pack_into("<I", raw, 4, ck.VERSION + 1)
    with pytest.raises(VersionMismatch):
        ck.from_bytes(bytes(raw))


def test_bad_magic_rejected():
    raw = bytearray(ck.to_bytes(_fresh()))
    raw[:4] = b"XXXX"
    with pytest.raises(VersionMismatch):
        ck.from_bytes(bytes(raw))


def test_flipped_payload_byte_rejected():
    raw = bytearray(ck.to_bytes(_fresh()))
    raw[ck._HEADER.size + 11] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        ck.from_bytes(bytes(raw))


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(CheckpointIoError):
        ck.load_checkpoint(str(tmp_path / "absent.bin"))


def test_unwritable_path_raises_io_error(tmp_path):
    with pytest.raises(CheckpointIoError):
        ck.save_checkpoint(_fresh(), str(tmp_path / "no" / "dir" / "c.bin"))


def test_make_checkpoint_fills_zero_opt():
    cfg = RunConfig()
    params = policy.init_params(np.random.default_rng(0), cfg.in_width, N_ACTIONS)
    c = make_checkpoint(cfg, params, None, epoch=0)
    assert c.opt.actor.t == 0
    assert all(not mw.any() and not mb.any() for mw, mb in c.opt.actor.m)
    ck.from_bytes(ck.to_bytes(c))
