import json
import os

import numpy as np
import pytest
import yaml

from lcc import cli, episode, harness, policy
from lcc.config import N_ACTIONS, RunConfig, with_overrides
from lcc.errors import ConfigMismatch
from lcc.problems import CATEGORIES, SuiteConfig, make_suite

TINY = dict(dim=20, m=4, ns=4, tg=5, lam=8, epochs=3, n_eval_runs=2)


def tiny_cfg(**kw):
    return RunConfig(**{**TINY, **kw})


def tiny_suite(n_train=3, n_test=2, seed=7):
    return make_suite(SuiteConfig(
        dims=20, m=4, categories=list(CATEGORIES),
        n_train=n_train, n_test=n_test, seed=seed,
    ))


def tiny_params(cfg, seed=1):
    return policy.init_params(np.random.default_rng(seed), cfg.in_width, N_ACTIONS)


def run_once(cfg=None, prob=None, seed=0, override=episode.RANDOM_POLICY, params=None):
    cfg = cfg or tiny_cfg()
    prob = prob or tiny_suite()[0]
    return episode.run_episode(
        prob, params, cfg, np.random.default_rng(seed), action_override=override
    )


class TestEpisode:
    def test_budget_lands_exactly_on_max_fes(self):
        cfg = tiny_cfg()
        _, log = run_once(cfg)
        assert log.total_fes == cfg.max_fes == 5 * 8 * 4 * 4
        assert len(log.steps) == cfg.ns

    def test_paper_counts_give_exactly_200000_fes(self):
        # budget arithmetic depends only on tg*lam*m*ns, so paper counts are
        # exercised at dim=100 to keep the test quick
        cfg = RunConfig(dim=100, m=10, ns=20, tg=50, lam=20)
        suite = make_suite(SuiteConfig(
            dims=100, m=10, categories=list(CATEGORIES),
            n_train=1, n_test=1, seed=3,
        ))
        _, log = run_once(cfg, suite[0])
        assert log.total_fes == 200000
        assert len(log.steps) == 20

    def test_decomposition_consumes_zero_fes(self):
        cfg = tiny_cfg()
        _, log = run_once(cfg)
        assert log.fes_by_phase.get("decompose", 0) == 0
        assert log.fes_by_phase["init"] == cfg.lam
        assert log.fes_by_phase["optimize"] == log.total_fes - cfg.lam

    def test_infinite_termination_error_disables_early_stop(self):
        cfg = tiny_cfg(termination_error=np.inf)
        _, log = run_once(cfg)
        assert len(log.steps) == cfg.ns
        assert not log.early_stopped

    def test_huge_finite_threshold_stops_after_first_step(self):
        cfg = tiny_cfg(termination_error=1e30)
        _, log = run_once(cfg)
        assert log.early_stopped
        assert len(log.steps) == 1
        assert log.total_fes < cfg.max_fes

    def test_reward_telescoping_main_variant(self):
        cfg = tiny_cfg()
        for seed in range(4):
            traj, log = run_once(cfg, seed=seed)
            total = (log.f0_gap - log.final_gap) / max(log.f0_gap, 1e-12)
            assert abs(float(np.sum(traj.rewards)) - total) < 1e-9

    def test_reward1_matches_documented_formula(self):
        cfg = tiny_cfg(reward_variant="r1")
        traj, log = run_once(cfg)
        for r, step in zip(traj.rewards, log.steps):
            expect = (log.f0_gap - step.best_gap) / max(log.f0_gap, 1e-12)
            assert abs(r - expect) < 1e-12

    def test_reward2_matches_documented_formula(self):
        cfg = tiny_cfg(reward_variant="r2")
        traj, log = run_once(cfg)
        prev = log.f0_gap
        for r, step in zip(traj.rewards, log.steps):
            expect = (prev - step.best_gap) / max(prev, 1e-12)
            assert abs(r - expect) < 1e-12
            prev = step.best_gap

    def test_fixed_override_uses_one_strategy(self):
        for arm in range(N_ACTIONS):
            traj, _ = run_once(override=arm)
            assert np.all(traj.actions == arm)

    def test_random_override_logs_uniform_logprob(self):
        traj, _ = run_once()
        assert np.allclose(traj.logprobs_old, np.log(1.0 / N_ACTIONS))

    def test_policy_episode_gap_monotone_nonincreasing(self):
        cfg = tiny_cfg()
        _, log = run_once(cfg, params=tiny_params(cfg), override=None)
        gaps = [log.f0_gap] + [s.best_gap for s in log.steps]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))

    def test_dim_mismatch_rejected(self):
        cfg = tiny_cfg(dim=24, m=4)
        with pytest.raises(ValueError):
            run_once(cfg)

    def test_wall_ms_zero_without_timing_flag(self):
        _, log = run_once()
        assert all(s.wall_ms == 0 for s in log.steps)

    def test_wall_ms_measured_with_timing_flag(self):
        cfg = tiny_cfg(dim=40, tg=20, lam=16, timing=True)
        suite = make_suite(SuiteConfig(
            dims=40, m=4, categories=list(CATEGORIES),
            n_train=1, n_test=1, seed=7,
        ))
        _, log = run_once(cfg, suite[0])
        assert any(s.wall_ms > 0 for s in log.steps)


class TestAblationStates:
    def _states(self, ablation, seed=0):
        cfg = tiny_cfg(ablation=ablation)
        _, log = run_once(cfg, seed=seed, params=tiny_params(cfg), override=None)
        return np.array(log.states), cfg

    def test_blocks_zeroed_lengths_kept(self):
        full, cfg = self._states("none")
        go_cut, sd_cut = 12, 12 + 4 * cfg.m
        for name, lo, hi in (
            ("go", 0, go_cut), ("sd", go_cut, sd_cut), ("ah", sd_cut, full.shape[1]),
        ):
            states, _ = self._states(name)
            assert states.shape[1] == cfg.in_width
            assert not states[:, lo:hi].any()

    def test_full_and_ablated_digests_differ(self):
        cfg_full = tiny_cfg()
        cfg_go = tiny_cfg(ablation="go")
        _, lf = run_once(cfg_full, params=tiny_params(cfg_full), override=None)
        _, lg = run_once(cfg_go, params=tiny_params(cfg_go), override=None)
        assert [s.state_digest for s in lf.steps] != [s.state_digest for s in lg.steps]


class TestTrain:
    def test_artifacts_and_epoch_counter(self, tmp_path):
        cfg = tiny_cfg()
        ckpt, paths = harness.train(cfg, tiny_suite(), str(tmp_path))
        assert ckpt.epoch == cfg.epochs
        assert len(paths["epochs"]) == cfg.epochs
        for p in paths["epochs"] + [paths["final"], paths["log"], paths["metrics"]]:
            assert os.path.exists(p)
        rows = [json.loads(l) for l in open(paths["log"])]
        assert len(rows) == cfg.epochs * 3 * cfg.ns
        assert list(rows[0]) == list(harness.LOG_FIELDS)

    def test_epochs_zero_keeps_initial_params(self, tmp_path):
        cfg = tiny_cfg(epochs=0)
        ckpt, paths = harness.train(cfg, tiny_suite(), str(tmp_path))
        init = policy.init_params(
            np.random.default_rng([cfg.seed, 0]), cfg.in_width, N_ACTIONS
        )
        for (w, b), (wi, bi) in zip(ckpt.params.actor, init.actor):
            assert np.array_equal(w, wi) and np.array_equal(b, bi)
        assert paths["epochs"] == []
        assert ckpt.epoch == 0

    def test_two_invocations_byte_identical(self, tmp_path):
        cfg = tiny_cfg()
        suite = tiny_suite()
        _, p1 = harness.train(cfg, suite, str(tmp_path / "a"))
        _, p2 = harness.train(cfg, suite, str(tmp_path / "b"))
        for key in ("final", "log", "metrics"):
            b1 = open(p1[key], "rb").read()
            assert b1 == open(p2[key], "rb").read()

    def test_save_every_zero_writes_final_only(self, tmp_path):
        _, paths = harness.train(tiny_cfg(), tiny_suite(), str(tmp_path), save_every=0)
        assert paths["epochs"] == []
        assert os.path.exists(paths["final"])

    def test_no_training_problems_rejected(self, tmp_path):
        suite = [p for p in tiny_suite() if p.role == "test"]
        with pytest.raises(ValueError):
            harness.train(tiny_cfg(), suite, str(tmp_path))


class TestEvaluate:
    def _trained(self, tmp_path, cfg=None):
        cfg = cfg or tiny_cfg(epochs=1)
        ckpt, _ = harness.train(cfg, tiny_suite(), str(tmp_path / "t"), save_every=0)
        return cfg, ckpt

    def test_report_shape_and_counts(self, tmp_path):
        cfg, ckpt = self._trained(tmp_path)
        probs = harness.test_split(tiny_suite())
        rep = harness.evaluate(ckpt, probs, cfg, str(tmp_path / "e"))
        assert len(rep) == len(probs)
        for r in rep:
            assert sum(r["actions"]) == cfg.ns * cfg.n_eval_runs
            assert r["mean_fes"] == cfg.max_fes
            assert r["early_stops"] == 0
        rows = [json.loads(l) for l in open(tmp_path / "e" / "eval_log.jsonl")]
        assert len(rows) == len(probs) * cfg.n_eval_runs * cfg.ns
        header = open(tmp_path / "e" / "eval_summary.csv").readline().strip()
        assert header.startswith("problem,category,role,n_runs,mean_gap,std_gap,act_mivd")

    def test_structural_mismatch_rejected(self, tmp_path):
        cfg, ckpt = self._trained(tmp_path)
        other = with_overrides(cfg, tg=7)
        with pytest.raises(ConfigMismatch):
            harness.evaluate(ckpt, tiny_suite()[:1], other, str(tmp_path / "e"))

    def test_eval_knobs_do_not_mismatch(self, tmp_path):
        cfg, ckpt = self._trained(tmp_path)
        greedy = with_overrides(cfg, policy_mode="greedy", seed=123)
        harness.evaluate(ckpt, tiny_suite()[:1], greedy, str(tmp_path / "e"))


class TestCompare:
    def test_budget_parity_and_score_range(self, tmp_path):
        cfg = tiny_cfg(epochs=1)
        params = tiny_params(cfg)
        probs = harness.test_split(tiny_suite())
        res = harness.compare_baselines(cfg, probs, params, str(tmp_path))
        assert set(res["mean_scores"]) == set(harness.COMPARE_ARMS)
        for p, stats in res["per_problem"].items():
            means = [s["mean_gap"] for s in stats.values()]
            scores = sorted(s["score"] for s in stats.values())
            for s in stats.values():
                assert s["mean_fes"] == cfg.max_fes
                assert 0.0 <= s["score"] <= 1.0
            if max(means) > min(means):
                assert scores[0] == 0.0 and scores[-1] == 1.0

    def test_reproducible_across_calls(self, tmp_path):
        cfg = tiny_cfg(epochs=1)
        params = tiny_params(cfg)
        probs = harness.test_split(tiny_suite())
        r1 = harness.compare_baselines(cfg, probs, params, str(tmp_path / "a"))
        r2 = harness.compare_baselines(cfg, probs, params, str(tmp_path / "b"))
        assert r1 == r2

    def test_missing_params_rejected_only_with_lcc_arm(self, tmp_path):
        cfg = tiny_cfg()
        probs = tiny_suite()[:1]
        with pytest.raises(ValueError):
            harness.compare_baselines(cfg, probs, None, str(tmp_path))
        arms = tuple(a for a in harness.COMPARE_ARMS if a != "lcc")
        res = harness.compare_baselines(
            cfg, probs, None, str(tmp_path), arms=arms, n_runs=1
        )
        assert "lcc" not in res["mean_scores"]

    def test_minmax_scores_hand_case(self):
        scores = harness.minmax_scores({"a": 0.0, "b": 5.0, "c": 10.0})
        assert scores == {"a": 1.0, "b": 0.5, "c": 0.0}
        ties = harness.minmax_scores({"a": 2.0, "b": 2.0})
        assert ties == {"a": 0.5, "b": 0.5}


class TestAblate:
    def test_sweep_shapes_and_artifacts(self, tmp_path):
        cfg = tiny_cfg(epochs=1, n_eval_runs=1)
        res = harness.ablate(cfg, tiny_suite(), str(tmp_path), train_seeds=(0, 1))
        names = [n for n, _, _ in harness.ABLATION_ARMS]
        assert set(res["mean_scores"]) == set(names)
        assert set(res["per_seed"]) == {0, 1}
        for v in res["mean_scores"].values():
            assert 0.0 <= v <= 1.0
        assert os.path.exists(tmp_path / "ablation.csv")
        assert os.path.exists(tmp_path / "ablation_summary.csv")
        assert os.path.exists(tmp_path / "seed00-full" / "final.bin")


class TestCli:
    def _write_cfg(self, tmp_path):
        path = tmp_path / "tiny.yaml"
        path.write_text(yaml.safe_dump({
            "run": dict(TINY),
            "suite": {"dims": 20, "m": 4, "n_train": 3, "n_test": 2, "seed": 7},
        }))
        return str(path)

    def test_suite_gen_manifest(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        manifest = str(tmp_path / "suite.yaml")
        assert cli.main(["suite", "gen", "--config", cfg, "--manifest", manifest]) == 0
        entries = yaml.safe_load(open(manifest))
        assert len(entries) == 5
        assert {e["role"] for e in entries} == {"train", "test"}

    def test_train_evaluate_inspect_flow(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        out = str(tmp_path / "run")
        assert cli.main(["train", "--config", cfg, "--out", out,
                         "--save-every", "0"]) == 0
        final = os.path.join(out, "final.bin")
        assert cli.main(["evaluate", "--config", cfg, "--ckpt", final,
                         "--out", str(tmp_path / "ev"), "--runs", "1"]) == 0
        assert cli.main(["ckpt", "inspect", final]) == 0
        text = capsys.readouterr().out
        assert "version:     1" in text
        assert "mivd/rd/mavd" in text

    def test_compare_without_ckpt_drops_lcc_arm(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        assert cli.main(["compare", "--config", cfg, "--out", str(tmp_path / "c"),
                         "--runs", "1"]) == 0
        text = capsys.readouterr().out
        assert "cc-rd" in text and "lcc " not in text

    def test_unknown_profile_flag_rejected(self):
        with pytest.raises(SystemExit):
            cli.main(["train", "--profile", "cluster"])

    def test_greedy_flag_round_trips(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        out = str(tmp_path / "run")
        assert cli.main(["train", "--config", cfg, "--out", out,
                         "--save-every", "0"]) == 0
        assert cli.main(["evaluate", "--config", cfg, "--greedy",
                         "--ckpt", os.path.join(out, "final.bin"),
                         "--out", str(tmp_path / "ev"), "--runs", "1"]) == 0
