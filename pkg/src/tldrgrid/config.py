"""Run configuration: defaults, config-file parsing, CLI overrides, provenance."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, asdict, fields, replace


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    layout: str = "large"
    seed: int = 0
    epochs: int = 100
    horizon: int = 0              # 0 -> layout default
    # representation
    phi_dim: int = 4
    phi_hidden: int = 64
    phi_depth: int = 2
    phi_lr: float = 3e-3
    lam0: float = 30.0
    lam_lr: float = 0.1
    epsilon: float = 1e-3
    # rewards
    k: int = 12
    reference_batch: int = 256
    # agent
    q_hidden: int = 64
    q_depth: int = 2
    q_lr: float = 1e-3
    alpha: float = 0.05
    gamma_goal: float = 0.5
    gamma_explore: float = 0.6
    tau: float = 0.98
    # replay / training
    buffer_capacity: int = 100_000
    recent_window: int = 8000
    batch_size: int = 512
    goal_batch: int = 1024
    relabel_ratio: float = 0.8
    rollouts_per_epoch: int = 8
    grad_steps_per_epoch: int = 100
    phi_updates_per_step: int = 1
    qg_updates_per_step: int = 2
    # ablations
    goal_selection: str = "tldr"       # tldr | uniform | rnd
    gcrl_reward: str = "tldr_dense"    # tldr_dense | sparse
    update_order: str = "phi_first"    # phi_first | policies_first
    # bookkeeping
    eval_every: int = 1
    checkpoint_every: int = 10
    out_dir: str = "runs"

    def validate(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.phi_dim < 1:
            raise ConfigError("phi_dim must be >= 1")
        for name in ("phi_lr", "lam_lr", "q_lr", "epsilon", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.relabel_ratio <= 1.0:
            raise ConfigError("relabel_ratio must be in [0, 1]")
        if self.goal_selection not in ("tldr", "uniform", "rnd"):
            raise ConfigError(f"unknown goal_selection {self.goal_selection!r}")
        if self.gcrl_reward not in ("tldr_dense", "sparse"):
            raise ConfigError(f"unknown gcrl_reward {self.gcrl_reward!r}")
        if self.update_order not in ("phi_first", "policies_first"):
            raise ConfigError(f"unknown update_order {self.update_order!r}")
        if self.rollouts_per_epoch < 1 or self.grad_steps_per_epoch < 1:
            raise ConfigError("rollouts and gradient steps must be >= 1")
        if self.recent_window < 1:
            raise ConfigError("recent_window must be >= 1")
        if self.phi_updates_per_step < 1 or self.qg_updates_per_step < 1:
            raise ConfigError("per-step update counts must be >= 1")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, raw):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    current = getattr(RunConfig(), name)
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(float(raw))
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config(text: str) -> RunConfig:
    """Flat key = value format; `#` starts a comment."""
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        cfg = replace(cfg, **{key.strip(): _coerce(key.strip(), raw.strip())})
    return cfg.validate()


def serialize_config(cfg: RunConfig) -> str:
    """All effective values, one per line, stable order."""
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:10]


def as_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
