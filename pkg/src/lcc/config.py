"""Run/suite configuration: profiles, YAML loading, validation, fingerprint."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace

import yaml

from .errors import ConfigError
from .features import state_size
from .problems import CATEGORIES, SuiteConfig

N_ACTIONS = 3


@dataclass
class RunConfig:
    dim: int = 100
    m: int = 5
    ns: int = 10              # strategy decisions per episode
    tg: int = 20              # CMA-ES generations per subgroup run
    lam: int = 10             # offspring per generation
    epochs: int = 30
    seed: int = 0
    termination_error: float = 1e-8
    policy_mode: str = "stochastic"
    ablation: str = "none"
    reward_variant: str = "main"
    gamma: float = 0.99
    clip_eps: float = 0.2
    k_iters: int = 3
    lr: float = 6e-4
    n_eval_runs: int = 10
    timing: bool = False

    @property
    def sub_max_fes(self) -> int:
        return self.tg * self.lam

    @property
    def max_fes(self) -> int:
        return self.tg * self.lam * self.m * self.ns

    @property
    def in_width(self) -> int:
        return state_size(self.m, N_ACTIONS)

    def validate(self) -> "RunConfig":
        if self.dim % self.m != 0:
            raise ConfigError(f"dim={self.dim} not divisible by m={self.m}")
        for name in ("dim", "m", "ns", "tg", "lam"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0 or self.n_eval_runs < 1:
            raise ConfigError("epochs must be >= 0 and n_eval_runs >= 1")
        if self.policy_mode not in ("stochastic", "greedy"):
            raise ConfigError(f"unknown policy_mode {self.policy_mode!r}")
        if self.ablation not in ("none", "go", "sd", "ah"):
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if self.reward_variant not in ("main", "r1", "r2"):
            raise ConfigError(f"unknown reward_variant {self.reward_variant!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.clip_eps <= 0.0 or self.lr <= 0.0 or self.k_iters < 0:
            raise ConfigError("clip_eps/lr must be positive, k_iters >= 0")
        if self.termination_error < 0.0:
            raise ConfigError("termination_error must be >= 0")
        return self


PROFILES = {
    # 30 epochs x 6 problems is too little data for the full-scale learning
    # rate to move the actor, so the desk profile trains hotter
    "desk": {
        "run": dict(dim=100, m=5, ns=10, tg=20, lam=10, epochs=30, lr=0.005),
        "suite": dict(dims=100, m=5, n_train=6, n_test=4),
    },
    "paper": {
        "run": dict(dim=1000, m=10, ns=20, tg=50, lam=20, epochs=90),
        "suite": dict(dims=1000, m=10, n_train=15, n_test=10),
    },
}

# keys accepted in the `run:` section beyond RunConfig fields; both are
# derived, so stated values must agree with the TG*lam(*m*ns) arithmetic
_DERIVED_RUN_KEYS = ("sub_max_fes", "max_fes")


def _known_run_keys():
    return {f.name for f in fields(RunConfig)} | set(_DERIVED_RUN_KEYS)


def _known_suite_keys():
    return {f.name for f in fields(SuiteConfig)}


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must be a mapping")
    unknown_sections = set(data) - {"run", "suite"}
    if unknown_sections:
        raise ConfigError(f"unknown config sections {sorted(unknown_sections)}")
    for section, known in (("run", _known_run_keys()), ("suite", _known_suite_keys())):
        entries = data.get(section) or {}
        if not isinstance(entries, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        bad = set(entries) - known
        if bad:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(bad)}")
    return data


def build_configs(
    profile: str = "desk",
    file_data: dict | None = None,
    run_overrides: dict | None = None,
    suite_overrides: dict | None = None,
):
    """Merge profile defaults <- config file <- explicit overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    run_kw = dict(PROFILES[profile]["run"])
    suite_kw = dict(
        categories=list(CATEGORIES),
        seed=0,
        bounds=(-100.0, 100.0),
        **PROFILES[profile]["suite"],
    )
    file_data = file_data or {}
    file_run = dict(file_data.get("run") or {})
    stated = {k: file_run.pop(k) for k in _DERIVED_RUN_KEYS if k in file_run}
    run_kw.update(file_run)
    suite_kw.update(file_data.get("suite") or {})
    run_kw.update(run_overrides or {})
    suite_kw.update(suite_overrides or {})

    run_cfg = RunConfig(**run_kw).validate()
    if "sub_max_fes" in stated and int(stated["sub_max_fes"]) != run_cfg.sub_max_fes:
        raise ConfigError(
            f"sub_max_fes={stated['sub_max_fes']} contradicts tg*lam={run_cfg.sub_max_fes}"
        )
    if "max_fes" in stated and int(stated["max_fes"]) != run_cfg.max_fes:
        raise ConfigError(
            f"max_fes={stated['max_fes']} contradicts tg*lam*m*ns={run_cfg.max_fes}"
        )

    if isinstance(suite_kw.get("bounds"), list):
        suite_kw["bounds"] = tuple(float(v) for v in suite_kw["bounds"])
    suite_cfg = SuiteConfig(**suite_kw)
    if suite_cfg.dims != run_cfg.dim or suite_cfg.m != run_cfg.m:
        raise ConfigError(
            f"suite dims/m ({suite_cfg.dims}/{suite_cfg.m}) disagree with "
            f"run config ({run_cfg.dim}/{run_cfg.m})"
        )
    return run_cfg, suite_cfg


# settings that decide whether a checkpoint is usable under a config; seeds,
# optimizer hyperparameters and evaluation knobs deliberately excluded
_FINGERPRINT_KEYS = (
    "dim", "m", "ns", "tg", "lam", "termination_error",
    "ablation", "reward_variant",
)


def fingerprint(run_cfg: RunConfig) -> int:
    """Stable 64-bit hash of the structural run settings."""
    d = asdict(run_cfg)
    payload = json.dumps({k: d[k] for k in _FINGERPRINT_KEYS}, sort_keys=True).encode()
    return int.from_bytes(
        hashlib.blake2b(payload, digest_size=8).digest(), "little"
    )


def with_overrides(run_cfg: RunConfig, **kw) -> RunConfig:
    return replace(run_cfg, **kw).validate()
