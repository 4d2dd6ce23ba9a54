"""Command-line entry points: train, eval, sweep."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace

from . import controller, env
from .config import ConfigError, RunConfig, config_hash, parse_config, serialize_config


def sparse_reward(sp_cell, goal_cell) -> float:
    """Goal-reaching reward of the sparse ablation: 0 at the goal, -1 elsewhere."""
    return 0.0 if tuple(sp_cell) == tuple(goal_cell) else -1.0


def _layout_digest(cfg: RunConfig) -> bytes:
    spec = env.load_layout(cfg.layout)
    blob = repr((spec.width, spec.height, sorted(spec.walls), spec.start,
                 tuple(spec.goals))).encode()
    return hashlib.sha256(blob).digest()[:16]


def _add_common_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--layout", help="bundled layout name or path to a .maze file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--goal-selection", choices=["tldr", "uniform", "rnd"])
    p.add_argument("--gcrl-reward", choices=["tldr_dense", "sparse"])
    p.add_argument("--k", type=int)
    p.add_argument("--phi-dim", type=int)
    p.add_argument("--update-order", choices=["phi_first", "policies_first"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--grad-steps", type=int)
    p.add_argument("--hidden", type=int, help="hidden width for all networks")


def _build_config(args) -> RunConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = RunConfig()
    overrides = {}
    mapping = {"layout": "layout", "seed": "seed", "epochs": "epochs",
               "out_dir": "out_dir", "goal_selection": "goal_selection",
               "gcrl_reward": "gcrl_reward", "k": "k", "phi_dim": "phi_dim",
               "update_order": "update_order", "horizon": "horizon",
               "batch_size": "batch_size", "grad_steps": "grad_steps_per_epoch"}
    for arg_name, cfg_name in mapping.items():
        val = getattr(args, arg_name, None)
        if val is not None:
            overrides[cfg_name] = val
    hidden = getattr(args, "hidden", None)
    if hidden is not None:
        overrides["phi_hidden"] = hidden
        overrides["q_hidden"] = hidden
    cfg = replace(cfg, **overrides)
    env_out = os.environ.get("TLDR_OUT")
    if env_out:
        cfg = replace(cfg, out_dir=env_out)
    return cfg.validate()


def run_train(cfg: RunConfig, quiet: bool = False) -> int:
    out_dir = os.path.join(cfg.out_dir, f"seed{cfg.seed}_{config_hash(cfg)}")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output dir: {exc}", file=sys.stderr)
        return 1
    with open(os.path.join(out_dir, "run_config.txt"), "w") as fh:
        fh.write(serialize_config(cfg))
    digest = _layout_digest(cfg)
    state = controller.init_run(cfg)
    csv_path = os.path.join(out_dir, "metrics.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(controller.METRICS_COLUMNS) + "\n")
        fh.flush()
        for epoch in range(cfg.epochs):
            row = controller.train_epoch(state)
            fh.write(row.to_csv() + "\n")
            fh.flush()
            if not quiet:
                print(f"epoch {row.epoch} coverage={row.coverage_cells} "
                      f"reached={row.goals_reached}", file=sys.stderr)
            if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                with open(os.path.join(out_dir, f"ckpt_{epoch + 1:05d}.bin"), "wb") as cf:
                    controller.save_run(cf, state, digest)
    with open(os.path.join(out_dir, "ckpt_final.bin"), "wb") as cf:
        controller.save_run(cf, state, digest)
    with open(os.path.join(out_dir, "visits.csv"), "w") as vf:
        vf.write("x,y,count\n")
        for (x, y), c in sorted(state.visit_counts.items()):
            vf.write(f"{x},{y},{c}\n")
    return 0


def run_eval(cfg: RunConfig, checkpoint: str) -> int:
    try:
        with open(checkpoint, "rb") as fh:
            state, digest = controller.load_run(fh, cfg)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load checkpoint: {exc}", file=sys.stderr)
        return 1
    if digest != _layout_digest(cfg):
        print("error: checkpoint layout does not match --layout", file=sys.stderr)
        return 1
    reached, mean_dist, successes = controller.evaluate(state)
    fields = [f"goals_reached={reached}", f"mean_goal_distance={repr(mean_dist)}",
              f"n_goals={len(successes)}"] + [str(int(s)) for s in successes]
    print(" ".join(fields))
    return 0


def run_sweep(cfg: RunConfig, seeds, goal_selections=None) -> int:
    selections = goal_selections or [cfg.goal_selection]
    for selection in selections:
        for seed in seeds:
            sub = replace(cfg, seed=seed, goal_selection=selection).validate()
            status = run_train(sub, quiet=True)
            if status != 0:
                return status
            print(f"done seed={seed} goal_selection={selection}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tldrgrid",
                                     description="Temporal-distance goal-conditioned RL on grid mazes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training and write metrics/checkpoints")
    _add_common_flags(p_train)
    p_train.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on its layout goal set")
    _add_common_flags(p_eval)
    p_eval.add_argument("--checkpoint", required=True)

    p_sweep = sub.add_parser("sweep", help="train across seeds and ablation arms")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--seeds", type=int, nargs="+", default=[0])
    p_sweep.add_argument("--goal-selections", nargs="+",
                         choices=["tldr", "uniform", "rnd"])

    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "train":
        return run_train(cfg, quiet=args.quiet)
    if args.command == "eval":
        return run_eval(cfg, args.checkpoint)
    if args.command == "sweep":
        return run_sweep(cfg, args.seeds, args.goal_selections)
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
