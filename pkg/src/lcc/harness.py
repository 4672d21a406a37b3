"""Training, evaluation, baseline comparison and ablation orchestration.

Artifacts land under an output directory: per-epoch checkpoints, JSONL step
logs (one record per MDP step, fixed field order), and CSV summaries for
plotting. Every run is a pure function of (config, seed); with timing off the
wall_ms field is 0, so repeated invocations produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from . import checkpoint as ckpt_io
from . import episode, policy
from .config import N_ACTIONS, RunConfig, fingerprint, with_overrides
from .decomposition import STRATEGY_NAMES
from .errors import ConfigMismatch
from .ppo import AdamState, OptState, TrainConfig, train_epoch

LOG_FIELDS = (
    "epoch", "problem_id", "run_seed", "step", "action",
    "reward", "best_gap", "fes_used", "wall_ms",
)
COMPARE_ARMS = (
    "lcc", "lcc-random", "cc-mivd", "cc-rd", "cc-mavd", "cmaes", "sep-cmaes",
)
FIXED_ARMS = {"cc-mivd": 0, "cc-rd": 1, "cc-mavd": 2}
# name -> (ablation, reward_variant)
ABLATION_ARMS = (
    ("full", "none", "main"),
    ("wo-go", "go", "main"),
    ("wo-sd", "sd", "main"),
    ("wo-ah", "ah", "main"),
    ("r1", "none", "r1"),
    ("r2", "none", "r2"),
)


def train_split(suite):
    return [p for p in suite if p.role == "train"]


def test_split(suite):
    return [p for p in suite if p.role == "test"]


def _step_rows(epoch, problem_id, run_seed, log):
    rows = []
    for i, s in enumerate(log.steps):
        rows.append({
            "epoch": epoch,
            "problem_id": problem_id,
            "run_seed": run_seed,
            "step": i,
            "action": s.action,
            "reward": s.reward,
            "best_gap": s.best_gap,
            "fes_used": s.fes_used,
            "wall_ms": s.wall_ms,
        })
    return rows


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def make_checkpoint(cfg: RunConfig, params, opt, epoch: int):
    if opt is None:
        opt = OptState(
            actor=AdamState.zeros_like(params.actor),
            critic=AdamState.zeros_like(params.critic),
        )
    return ckpt_io.Checkpoint(
        fingerprint=fingerprint(cfg),
        m=cfg.m,
        n_actions=N_ACTIONS,
        in_width=cfg.in_width,
        epoch=epoch,
        seed=cfg.seed,
        params=params,
        opt=opt,
    )


def train(cfg: RunConfig, suite, out_dir, save_every: int = 1):
    """Run the full training loop; returns (final Checkpoint, artifact paths).

    One episode per training problem per epoch, in fixed suite order, then a
    PPO update on the pooled trajectories. Checkpoints go to epoch-NNNN.bin
    every `save_every` epochs (0 = final only) and always to final.bin.
    """
    cfg.validate()
    tr = train_split(suite)
    if not tr:
        raise ValueError("suite has no training problems")
    os.makedirs(out_dir, exist_ok=True)

    params = policy.init_params(
        np.random.default_rng([cfg.seed, 0]), cfg.in_width, N_ACTIONS
    )
    tc = TrainConfig(
        gamma=cfg.gamma, clip_eps=cfg.clip_eps, k_iters=cfg.k_iters, lr=cfg.lr
    )
    log_rows = []
    metric_rows = []
    epoch_paths = []

    for ep in range(cfg.epochs):
        trajs = []
        gaps = []
        for p_idx, prob in enumerate(tr):
            rng = np.random.default_rng([cfg.seed, ep + 1, p_idx])
            traj, elog = episode.run_episode(prob, params, cfg, rng)
            trajs.append(traj)
            gaps.append(elog.final_gap)
            log_rows.extend(_step_rows(ep, prob.name, cfg.seed, elog))
        params, metrics = train_epoch(params, trajs, tc)
        metric_rows.append([
            ep, metrics["actor_loss"], metrics["critic_loss"],
            metrics["entropy"], metrics["mean_advantage"],
            float(np.mean(gaps)),
        ])
        if save_every and (ep + 1) % save_every == 0:
            path = os.path.join(out_dir, f"epoch-{ep + 1:04d}.bin")
            ckpt_io.save_checkpoint(make_checkpoint(cfg, params, tc.opt, ep + 1), path)
            epoch_paths.append(path)

    final = make_checkpoint(cfg, params, tc.opt, cfg.epochs)
    final_path = os.path.join(out_dir, "final.bin")
    ckpt_io.save_checkpoint(final, final_path)
    log_path = os.path.join(out_dir, "train_log.jsonl")
    _write_jsonl(log_path, log_rows)
    metrics_path = os.path.join(out_dir, "train_metrics.csv")
    _write_csv(
        metrics_path,
        ["epoch", "actor_loss", "critic_loss", "entropy", "mean_advantage",
         "mean_final_gap"],
        metric_rows,
    )
    paths = {
        "final": final_path,
        "epochs": epoch_paths,
        "log": log_path,
        "metrics": metrics_path,
    }
    return final, paths


def _check_compatible(ckpt, cfg: RunConfig):
    if ckpt.fingerprint != fingerprint(cfg):
        raise ConfigMismatch(
            f"checkpoint fingerprint {ckpt.fingerprint:#x} does not match "
            f"config fingerprint {fingerprint(cfg):#x}"
        )
    if ckpt.m != cfg.m or ckpt.in_width != cfg.in_width:
        raise ConfigMismatch("checkpoint structure does not match config")


def evaluate(ckpt, probs, cfg: RunConfig, out_dir, eval_seed=None, n_runs=None):
    """Evaluate a checkpoint's policy on each problem over n_runs episodes.

    Returns per-problem records (mean/std gap, action histogram, FE usage)
    and writes eval_log.jsonl + eval_summary.csv under out_dir.
    """
    _check_compatible(ckpt, cfg)
    if eval_seed is None:
        eval_seed = cfg.seed
    if n_runs is None:
        n_runs = cfg.n_eval_runs
    os.makedirs(out_dir, exist_ok=True)

    log_rows = []
    report = []
    for p_idx, prob in enumerate(probs):
        gaps, fes, stops = [], [], 0
        hist = np.zeros(N_ACTIONS, dtype=int)
        for run_i in range(n_runs):
            rng = np.random.default_rng([eval_seed, p_idx, run_i])
            traj, elog = episode.run_episode(prob, ckpt.params, cfg, rng)
            gaps.append(elog.final_gap)
            fes.append(elog.total_fes)
            stops += int(elog.early_stopped)
            for a in traj.actions:
                hist[a] += 1
            log_rows.extend(_step_rows(ckpt.epoch, prob.name, run_i, elog))
        report.append({
            "problem": prob.name,
            "category": prob.category,
            "role": prob.role,
            "n_runs": n_runs,
            "mean_gap": float(np.mean(gaps)),
            "std_gap": float(np.std(gaps)),
            "actions": hist.tolist(),
            "mean_fes": float(np.mean(fes)),
            "early_stops": stops,
        })

    _write_jsonl(os.path.join(out_dir, "eval_log.jsonl"), log_rows)
    _write_csv(
        os.path.join(out_dir, "eval_summary.csv"),
        ["problem", "category", "role", "n_runs", "mean_gap", "std_gap"]
        + [f"act_{STRATEGY_NAMES[a]}" for a in sorted(STRATEGY_NAMES)]
        + ["mean_fes", "early_stops"],
        [
            [r["problem"], r["category"], r["role"], r["n_runs"],
             r["mean_gap"], r["std_gap"], *r["actions"], r["mean_fes"],
             r["early_stops"]]
            for r in report
        ],
    )
    return report


def _arm_gap(arm, prob, params, cfg, rng):
    if arm == "lcc":
        _, elog = episode.run_episode(prob, params, cfg, rng)
        return elog.final_gap, elog.total_fes
    if arm == "lcc-random":
        _, elog = episode.run_episode(
            prob, None, cfg, rng, action_override=episode.RANDOM_POLICY
        )
        return elog.final_gap, elog.total_fes
    if arm in FIXED_ARMS:
        _, elog = episode.run_episode(
            prob, None, cfg, rng, action_override=FIXED_ARMS[arm]
        )
        return elog.final_gap, elog.total_fes
    if arm == "cmaes":
        return episode.run_full_cmaes(prob, cfg, rng, diagonal=False)
    if arm == "sep-cmaes":
        return episode.run_full_cmaes(prob, cfg, rng, diagonal=True)
    raise ValueError(f"unknown arm {arm!r}")


def minmax_scores(means_by_arm):
    """1 = best (lowest mean gap), 0 = worst; all equal -> 0.5 each."""
    vals = np.array([means_by_arm[a] for a in means_by_arm])
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        return {a: 0.5 for a in means_by_arm}
    return {
        a: 1.0 - (means_by_arm[a] - lo) / (hi - lo) for a in means_by_arm
    }


def compare_baselines(
    cfg: RunConfig, probs, params, out_dir,
    eval_seed=None, n_runs=None, arms=COMPARE_ARMS,
):
    """Run every arm under the same budget with paired seeds.

    The rng for (problem, run) is derived independently of the arm, so arms
    see identical initial populations where their sampling patterns agree.
    Writes compare.csv (per problem x arm) and compare_summary.csv.
    """
    if "lcc" in arms and params is None:
        raise ValueError("trained-policy arm requested without params")
    if eval_seed is None:
        eval_seed = cfg.seed
    if n_runs is None:
        n_runs = cfg.n_eval_runs
    os.makedirs(out_dir, exist_ok=True)

    per_problem = {}
    for p_idx, prob in enumerate(probs):
        stats = {}
        for arm in arms:
            gaps, fes = [], []
            for run_i in range(n_runs):
                rng = np.random.default_rng([eval_seed, p_idx, run_i])
                gap, used = _arm_gap(arm, prob, params, cfg, rng)
                gaps.append(gap)
                fes.append(used)
            stats[arm] = {
                "mean_gap": float(np.mean(gaps)),
                "std_gap": float(np.std(gaps)),
                "mean_fes": float(np.mean(fes)),
            }
        scores = minmax_scores({a: stats[a]["mean_gap"] for a in arms})
        for arm in arms:
            stats[arm]["score"] = scores[arm]
        per_problem[prob.name] = stats

    mean_scores = {
        arm: float(np.mean([per_problem[p][arm]["score"] for p in per_problem]))
        for arm in arms
    }
    _write_csv(
        os.path.join(out_dir, "compare.csv"),
        ["problem", "arm", "mean_gap", "std_gap", "score", "mean_fes"],
        [
            [p, a, s["mean_gap"], s["std_gap"], s["score"], s["mean_fes"]]
            for p, stats in per_problem.items()
            for a, s in stats.items()
        ],
    )
    _write_csv(
        os.path.join(out_dir, "compare_summary.csv"),
        ["arm", "mean_score"],
        [[a, mean_scores[a]] for a in arms],
    )
    return {"per_problem": per_problem, "mean_scores": mean_scores}


def _mean_gaps(probs, params, cfg, eval_seed, n_runs):
    out = {}
    for p_idx, prob in enumerate(probs):
        gaps = []
        for run_i in range(n_runs):
            rng = np.random.default_rng([eval_seed, p_idx, run_i])
            _, elog = episode.run_episode(prob, params, cfg, rng)
            gaps.append(elog.final_gap)
        out[prob.name] = float(np.mean(gaps))
    return out


def ablate(
    cfg: RunConfig, suite, out_dir,
    train_seeds=(0, 1, 2, 3, 4), eval_seed=None, n_runs=None,
    arms=ABLATION_ARMS,
):
    """Train each state/reward ablation arm per seed and score on the test split.

    Scores are min-max normalized across arms within each (seed, problem);
    the summary averages over problems then seeds. Per-arm training artifacts
    land in out_dir/seed<NN>-<arm>/.
    """
    if eval_seed is None:
        eval_seed = cfg.seed
    if n_runs is None:
        n_runs = cfg.n_eval_runs
    os.makedirs(out_dir, exist_ok=True)
    te = test_split(suite)
    if not te:
        raise ValueError("suite has no test problems")

    rows = []
    per_seed = {}
    for seed in train_seeds:
        arm_gaps = {}
        arm_cfgs = {}
        for name, ablation, variant in arms:
            arm_cfg = with_overrides(
                cfg, seed=seed, ablation=ablation, reward_variant=variant
            )
            sub = os.path.join(out_dir, f"seed{seed:02d}-{name}")
            ckpt, _ = train(arm_cfg, suite, sub, save_every=0)
            arm_gaps[name] = _mean_gaps(te, ckpt.params, arm_cfg, eval_seed, n_runs)
            arm_cfgs[name] = arm_cfg
        scores = {name: [] for name, _, _ in arms}
        for prob in te:
            s = minmax_scores({n: arm_gaps[n][prob.name] for n in arm_gaps})
            for name in s:
                scores[name].append(s[name])
                rows.append([seed, name, prob.name, arm_gaps[name][prob.name], s[name]])
        per_seed[seed] = {n: float(np.mean(v)) for n, v in scores.items()}

    mean_scores = {
        name: float(np.mean([per_seed[s][name] for s in per_seed]))
        for name, _, _ in arms
    }
    _write_csv(
        os.path.join(out_dir, "ablation.csv"),
        ["seed", "arm", "problem", "mean_gap", "score"],
        rows,
    )
    _write_csv(
        os.path.join(out_dir, "ablation_summary.csv"),
        ["arm", "mean_score"],
        [[n, mean_scores[n]] for n, _, _ in arms],
    )
    return {"per_seed": per_seed, "mean_scores": mean_scores}
