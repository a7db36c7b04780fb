"""
Goals anywhere in the workspace
===============================

The varying-goal preset redraws the goal with probability 0.1 at every
reset. After training we sweep the goal over a 0.5 m grid and record how
far the greedy rollout ends from it. Several minutes on one core.
"""

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vinedqn.config import load_config, preset_path
from vinedqn.qlearn import LatticePlanner, evaluate, heatmap, train

FIG = Path(__file__).with_name("figures")
FIG.mkdir(exist_ok=True)

cfg = load_config(preset_path("varying-goal"))
agent, metrics = train(cfg.env, cfg.hyper)
print(f"{metrics.transitions} training steps")

# %%
result = evaluate(agent, cfg.env, cfg.evaluation.trials, cfg.evaluation.step_limit,
                  np.random.default_rng(1))
print("success on fresh goals", result.success_rate)

# %% [markdown]
# Not every goal can be reached: growth only lengthens the body and the
# curvature moves in fixed steps, so part of the rectangle lies outside the
# set of tips the simulator can produce. A planner that searches the
# simulator directly gives the ceiling.

# %%
planner = LatticePlanner(cfg.env)
ceiling = evaluate(planner, cfg.env, cfg.evaluation.trials, cfg.evaluation.step_limit,
                   np.random.default_rng(1))
print("planner success on the same goals", ceiling.success_rate)

# %%
hm = heatmap(agent, cfg.env, cfg.heatmap.grid(), cfg.heatmap.step_limit)
n = hm.normalized
interior = n[1:-1, 1:-1].mean()
border = np.concatenate([n[0], n[-1], n[1:-1, 0], n[1:-1, -1]]).mean()
print(f"mean normalized error: interior {interior:.3f}, border {border:.3f}")

fig, ax = plt.subplots(figsize=(4, 6))
im = ax.imshow(n, origin="lower", extent=(hm.xs[0] - 0.25, hm.xs[-1] + 0.25, hm.ys[0] - 0.25, hm.ys[-1] + 0.25),
               cmap="magma_r", vmin=0, vmax=1)
fig.colorbar(im, label="final distance / max")
fig.savefig(FIG / "heatmap.png", dpi=120)
