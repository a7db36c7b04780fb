"""Command-line front end: ``vinedqn {train,eval,heatmap,shape-demo,rollout}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump_config, load_config, parse_config, preset_path, with_seed
from .environment import VineEnv, write_trajectory
from .interaction import clearance, resolve_shape
from .kinematics import SegmentedShape, chain_positions
from .qlearn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .qlearn.evaluation import evaluate, heatmap, rollout
from .qlearn.training import train

logger = logging.getLogger("vinedqn")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _resolve_config(args) -> RunConfig:
    if args.config is not None:
        path = Path(args.config)
        # bare preset names such as "fixed-goal" resolve to the shipped files
        if not path.exists() and path.suffix == "" and preset_path(args.config).exists():
            path = preset_path(args.config)
        cfg = load_config(path)
    elif getattr(args, "checkpoint", None):
        _, stored = _load_agent(args.checkpoint)
        cfg = parse_config(json.dumps(stored), f"{args.checkpoint}#config")
    else:
        raise UsageError("--config is required")
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_agent(path):
    if path is None:
        raise UsageError("--checkpoint is required")
    return load_checkpoint(path)


def smoothed(values, window: int) -> np.ndarray:
    """Trailing moving average (shorter windows at the start)."""
    values = np.asarray(values, dtype=float)
    csum = np.cumsum(np.insert(values, 0, 0.0))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args, cfg)
    every = max(1, cfg.hyper.episodes // 20)

    def progress(episode, metrics):
        if (episode + 1) % every == 0:
            logger.info("episode %d/%d  steps %.1f  reward %.1f  eps %.3f", episode + 1, cfg.hyper.episodes,
                        np.mean(metrics.steps[-every:]), np.mean(metrics.accumulated_reward[-every:]),
                        metrics.epsilon[-1])

    agent, metrics = train(cfg.env, cfg.hyper, progress)
    save_checkpoint(out / "checkpoint.json", agent, cfg.to_dict())
    (out / "config.yaml").write_text(dump_config(cfg))
    header = ["episode", "steps", "accumulated_reward", "discounted_return", "mean_loss", "epsilon", "reached"]
    _write_csv(out / "metrics.csv", header, ([row[h] for h in header] for row in metrics.rows()))
    summary = {
        "episodes": len(metrics),
        "training_steps": metrics.transitions,
        "selection_steps": metrics.selection_steps,
        "environment_steps": metrics.transitions + metrics.selection_steps,
        "updates": metrics.updates,
        "selected_episode": metrics.selected_episode,
    }
    (out / "train_summary.json").write_text(json.dumps(summary, indent=2))
    window = max(1, len(metrics) // 10)
    if len(metrics):
        print(f"final smoothed steps {smoothed(metrics.steps, window)[-1]:.2f}  "
              f"final smoothed reward {smoothed(metrics.accumulated_reward, window)[-1]:.2f}")
    print(f"wrote {out / 'checkpoint.json'} and {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    agent, _ = _load_agent(args.checkpoint)
    cfg = _resolve_config(args)
    out = _out_dir(args, cfg)
    trials = cfg.evaluation.trials if args.trials is None else args.trials
    step_limit = cfg.evaluation.step_limit if args.step_limit is None else args.step_limit
    if trials < 0 or step_limit < 0:
        raise UsageError("--trials and --step-limit must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(5)[4])
    result = evaluate(agent, cfg.env, trials, step_limit, rng, cfg.hyper.gamma)
    summary = {
        "trials": trials,
        "step_limit": step_limit,
        "success_rate": None if math.isnan(result.success_rate) else result.success_rate,
        "success_rate_defined": not math.isnan(result.success_rate),
    }
    (out / "eval_summary.json").write_text(json.dumps(summary, indent=2))
    counts, edges = result.steps_hist
    _write_csv(out / "steps_hist.csv", ["bin_lo_steps", "bin_hi_steps", "count"],
               zip(edges[:-1], edges[1:], counts))
    counts, edges = result.reward_hist
    _write_csv(out / "reward_hist.csv", ["bin_lo_reward", "bin_hi_reward", "count"],
               zip(edges[:-1], edges[1:], counts))
    _write_csv(out / "eval_episodes.csv",
               ["trial", "goal_x_m", "goal_y_m", "reached", "steps", "accumulated_reward", "final_d_m"],
               ((i, e.goal[0], e.goal[1], int(e.reached), e.steps, e.accumulated_reward, e.final_distance)
                for i, e in enumerate(result.episodes)))
    rate = "undefined (0 trials)" if not summary["success_rate_defined"] else f"{result.success_rate:.3f}"
    print(f"success rate {rate} over {trials} trials, step limit {step_limit}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    agent, _ = _load_agent(args.checkpoint)
    cfg = _resolve_config(args)
    out = _out_dir(args, cfg)
    step_limit = cfg.heatmap.step_limit if args.step_limit is None else args.step_limit
    hm = heatmap(agent, cfg.env, cfg.heatmap.grid(), step_limit)
    header = ["goal_x_m", "goal_y_m", "final_d_m", "normalized_error"]
    _write_csv(out / "heatmap.csv", header, ([row[h] for h in header] for row in hm.rows()))
    print(f"wrote {hm.normalized.size} cells to {out / 'heatmap.csv'}")
    return EXIT_OK


def shape_demo_polylines(cfg: RunConfig):
    """Yield ``(step, kappa_t, s, points, min_clearance)`` for the shape demo."""
    demo = cfg.shape_demo
    env_cfg = cfg.env
    w = env_cfg.interaction
    lo, hi = env_cfg.kappa_bounds
    kappa, s = demo.kappa_start, demo.s
    for step in range(demo.steps + 1):
        if env_cfg.obstacle is None:
            shape = SegmentedShape.uniform(kappa, s, w.n_segments)
            margin = math.nan
        else:
            shape = resolve_shape(kappa, s, w, env_cfg.obstacle).shape
            margin = float(clearance(shape, None, env_cfg.obstacle, w.robot_radius).min())
        points, _ = chain_positions(shape.kappas, s)
        yield step, kappa, s, points, margin
        kappa = min(max(kappa + demo.kappa_rate * env_cfg.dt, lo), hi)
        if demo.mode == "grow":
            s = min(s + demo.growth_rate * env_cfg.dt, env_cfg.s_max)


def cmd_shape_demo(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args, cfg)
    rows = []
    for step, kappa, s, points, margin in shape_demo_polylines(cfg):
        for i, (x, y) in enumerate(points):
            rows.append((step, kappa, s, i, x, y, margin))
    _write_csv(out / "shape_demo.csv",
               ["step", "kappa_t_per_m", "s_m", "point_index", "x_m", "y_m", "min_clearance_m"], rows)
    print(f"wrote {cfg.shape_demo.steps + 1} polylines to {out / 'shape_demo.csv'}")
    return EXIT_OK


def cmd_rollout(args) -> int:
    agent, _ = _load_agent(args.checkpoint)
    cfg = _resolve_config(args)
    out = _out_dir(args, cfg)
    step_limit = cfg.evaluation.step_limit if args.step_limit is None else args.step_limit
    env_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(5)[4])
    env = VineEnv(replace(cfg.env, max_steps=max(step_limit, 1), goal_change_prob=0.0), env_rng)
    if cfg.env.goal_change_prob > 0.0:
        env.set_goal(env.draw_goal())
    env.reset()
    episode = rollout(agent, env, step_limit, cfg.hyper.gamma, record=True)
    write_trajectory(out / "trajectory.csv", episode.rows)
    _write_csv(out / "backbones.csv", ["step", "point_index", "x_m", "y_m"],
               ((k, i, x, y) for k, pts in enumerate(episode.backbones) for i, (x, y) in enumerate(pts)))
    print(f"goal ({episode.goal[0]:.3f}, {episode.goal[1]:.3f})  reached={episode.reached}  "
          f"steps={episode.steps}  final d={episode.final_distance:.4f}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "heatmap": cmd_heatmap,
    "shape-demo": cmd_shape_demo,
    "rollout": cmd_rollout,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vinedqn", description="Vine-robot DQN simulator")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="run configuration (YAML)")
    parser.add_argument("--checkpoint", help="trained agent (JSON)")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="output directory (default: output_dir from the config)")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--step-limit", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as runtime failure
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
