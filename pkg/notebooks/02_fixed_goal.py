"""
Learning to reach one goal
==========================

Train the fixed-goal desk preset, look at how the episode length shrinks
over training, then replay the greedy policy and draw the body at every
step. About a minute on one core.
"""

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vinedqn.cli import smoothed
from vinedqn.config import load_config, preset_path
from vinedqn.environment import VineEnv
from vinedqn.qlearn import rollout, train

FIG = Path(__file__).with_name("figures")
FIG.mkdir(exist_ok=True)

cfg = load_config(preset_path("fixed-goal"))
print(cfg.hyper)

# %%
agent, metrics = train(cfg.env, cfg.hyper)
print(f"{metrics.transitions} environment steps, {metrics.updates} updates,"
      f" kept the snapshot after episode {metrics.selected_episode}")

# %% [markdown]
# Episode length and the accumulated reward, smoothed over 100 episodes.
# The slope of a straight-line fit to the smoothed lengths should be negative.

# %%
steps = smoothed(metrics.steps, 100)
slope = np.polyfit(np.arange(len(steps)), steps, 1)[0]
print("trend of smoothed steps per episode", slope)

fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
a1.plot(metrics.steps, lw=0.3, color="0.7")
a1.plot(steps)
a1.set_ylabel("steps")
a2.plot(smoothed(metrics.accumulated_reward, 100))
a2.set_ylabel("reward")
a2.set_xlabel("episode")
fig.savefig(FIG / "fixed_goal_training.png", dpi=120)

# %% [markdown]
# Greedy replay from the start state.

# %%
env = VineEnv(cfg.env)
env.reset()
ep = rollout(agent, env, cfg.evaluation.step_limit, record=True)
print(f"reached {ep.reached} in {ep.steps} steps, final distance {ep.final_distance:.3f} m")
print("actions", [r["action_index"] for r in ep.rows])

fig, ax = plt.subplots(figsize=(4, 5))
for k, pts in enumerate(ep.backbones):
    ax.plot(pts[:, 0], pts[:, 1], color=plt.cm.viridis(k / max(1, len(ep.backbones) - 1)), lw=0.8)
ax.plot(*cfg.env.goal, "r*", ms=12)
ax.set_aspect("equal")
fig.savefig(FIG / "fixed_goal_rollout.png", dpi=120)
