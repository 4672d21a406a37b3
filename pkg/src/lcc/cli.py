"""Command-line entry point.

Subcommands: suite gen, train, evaluate, compare, ablate, ckpt inspect.
Configuration comes from a profile (desk or paper), optionally a YAML file,
and per-flag overrides, merged in that order.
"""
from __future__ import annotations

import argparse
import sys

import yaml

from . import checkpoint as ckpt_io
from . import harness
from .config import build_configs, load_config_file
from .decomposition import STRATEGY_NAMES
from .problems import describe, make_suite


def _add_common(p):
    p.add_argument("--config", help="YAML config file with run:/suite: sections")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int, help="override run seed")
    p.add_argument("--out", default="runs/out", help="output directory")
    p.add_argument("--greedy", action="store_true",
                   help="argmax action selection instead of sampling")
    p.add_argument("--ablation", choices=("go", "sd", "ah", "none"),
                   help="zero out one state block")
    p.add_argument("--reward", choices=("main", "r1", "r2"),
                   help="reward variant")
    p.add_argument("--timing", action="store_true",
                   help="log real wall_ms per step (breaks byte reproducibility)")


def _configs(args):
    file_data = load_config_file(args.config) if args.config else None
    run_overrides = {}
    if args.seed is not None:
        run_overrides["seed"] = args.seed
    if args.greedy:
        run_overrides["policy_mode"] = "greedy"
    if args.ablation:
        run_overrides["ablation"] = args.ablation
    if args.reward:
        run_overrides["reward_variant"] = args.reward
    if args.timing:
        run_overrides["timing"] = True
    return build_configs(args.profile, file_data, run_overrides)


def _split(suite, which):
    if which == "train":
        return harness.train_split(suite)
    if which == "test":
        return harness.test_split(suite)
    return list(suite)


def cmd_suite_gen(args):
    _, suite_cfg = _configs(args)
    suite = make_suite(suite_cfg)
    manifest = [describe(p) for p in suite]
    text = yaml.safe_dump(manifest, sort_keys=False)
    if args.manifest == "-":
        sys.stdout.write(text)
    else:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(suite)} problems to {args.manifest}")
    return 0


def cmd_train(args):
    cfg, suite_cfg = _configs(args)
    suite = make_suite(suite_cfg)
    ckpt, paths = harness.train(cfg, suite, args.out, save_every=args.save_every)
    print(f"trained {cfg.epochs} epochs on {len(harness.train_split(suite))} problems")
    print(f"checkpoint: {paths['final']}")
    print(f"step log:   {paths['log']}")
    print(f"metrics:    {paths['metrics']}")
    return 0


def cmd_evaluate(args):
    cfg, suite_cfg = _configs(args)
    suite = make_suite(suite_cfg)
    ckpt = ckpt_io.load_checkpoint(args.ckpt)
    probs = _split(suite, args.split)
    report = harness.evaluate(
        ckpt, probs, cfg, args.out, eval_seed=args.eval_seed, n_runs=args.runs
    )
    hdr = f"{'problem':10s} {'category':16s} {'mean_gap':>12s} {'std_gap':>12s}  actions"
    print(hdr)
    for r in report:
        acts = "/".join(str(c) for c in r["actions"])
        print(f"{r['problem']:10s} {r['category']:16s} "
              f"{r['mean_gap']:12.4e} {r['std_gap']:12.4e}  {acts}")
    return 0


def cmd_compare(args):
    cfg, suite_cfg = _configs(args)
    suite = make_suite(suite_cfg)
    params = None
    arms = list(harness.COMPARE_ARMS)
    if args.ckpt:
        params = ckpt_io.load_checkpoint(args.ckpt).params
    else:
        arms.remove("lcc")
    probs = _split(suite, args.split)
    result = harness.compare_baselines(
        cfg, probs, params, args.out,
        eval_seed=args.eval_seed, n_runs=args.runs, arms=tuple(arms),
    )
    print(f"{'arm':12s} mean_score")
    for arm, score in sorted(
        result["mean_scores"].items(), key=lambda kv: -kv[1]
    ):
        print(f"{arm:12s} {score:.4f}")
    return 0


def cmd_ablate(args):
    cfg, suite_cfg = _configs(args)
    suite = make_suite(suite_cfg)
    seeds = tuple(int(s) for s in args.train_seeds.split(","))
    result = harness.ablate(
        cfg, suite, args.out,
        train_seeds=seeds, eval_seed=args.eval_seed, n_runs=args.runs,
    )
    print(f"{'arm':8s} mean_score")
    for arm, _, _ in harness.ABLATION_ARMS:
        print(f"{arm:8s} {result['mean_scores'][arm]:.4f}")
    return 0


def cmd_ckpt_inspect(args):
    ckpt = ckpt_io.load_checkpoint(args.path)
    n_actor = sum(w.size + b.size for w, b in ckpt.params.actor)
    n_critic = sum(w.size + b.size for w, b in ckpt.params.critic)
    print(f"version:     {ckpt.version}")
    print(f"fingerprint: {ckpt.fingerprint:#018x}")
    print(f"m:           {ckpt.m}")
    names = "/".join(STRATEGY_NAMES[a] for a in sorted(STRATEGY_NAMES))
    print(f"actions:     {ckpt.n_actions} ({names})")
    print(f"in_width:    {ckpt.in_width}")
    print(f"epoch:       {ckpt.epoch}")
    print(f"seed:        {ckpt.seed}")
    print(f"actor/critic params: {n_actor}/{n_critic}")
    print(f"adam steps:  {ckpt.opt.actor.t}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lcc",
        description="Learned covariance-guided decomposition for "
        "large-scale cooperative coevolution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_suite = sub.add_parser("suite", help="benchmark suite utilities")
    suite_sub = p_suite.add_subparsers(dest="suite_command", required=True)
    p_gen = suite_sub.add_parser("gen", help="write the suite manifest")
    _add_common(p_gen)
    p_gen.add_argument("--manifest", default="-",
                       help="manifest path, '-' for stdout")
    p_gen.set_defaults(fn=cmd_suite_gen)

    p_train = sub.add_parser("train", help="train the strategy policy")
    _add_common(p_train)
    p_train.add_argument("--save-every", type=int, default=1,
                         help="checkpoint every N epochs (0 = final only)")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--split", choices=("train", "test", "all"), default="test")
    p_eval.add_argument("--runs", type=int, help="episodes per problem")
    p_eval.add_argument("--eval-seed", type=int)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_cmp = sub.add_parser("compare", help="compare against baseline arms")
    _add_common(p_cmp)
    p_cmp.add_argument("--ckpt", help="trained policy; omitted = fixed arms only")
    p_cmp.add_argument("--split", choices=("train", "test", "all"), default="test")
    p_cmp.add_argument("--runs", type=int)
    p_cmp.add_argument("--eval-seed", type=int)
    p_cmp.set_defaults(fn=cmd_compare)

    p_abl = sub.add_parser("ablate", help="state/reward ablation sweep")
    _add_common(p_abl)
    p_abl.add_argument("--train-seeds", default="0,1,2,3,4",
                       help="comma-separated training seeds")
    p_abl.add_argument("--runs", type=int)
    p_abl.add_argument("--eval-seed", type=int)
    p_abl.set_defaults(fn=cmd_ablate)

    p_ckpt = sub.add_parser("ckpt", help="checkpoint utilities")
    ckpt_sub = p_ckpt.add_subparsers(dest="ckpt_command", required=True)
    p_ins = ckpt_sub.add_parser("inspect", help="print checkpoint header fields")
    p_ins.add_argument("path")
    p_ins.set_defaults(fn=cmd_ckpt_inspect)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
