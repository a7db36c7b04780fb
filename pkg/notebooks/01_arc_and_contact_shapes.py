"""
Arcs, segments and obstacle contact
===================================

A walk through the geometric core: the constant-curvature tip, the
piecewise arc used when the body rests against an obstacle, and what the
shape solver does as the commanded curvature sweeps past a peg.

Run with ``python notebooks/01_arc_and_contact_shapes.py``; figures land in
``notebooks/figures/``.
"""

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vinedqn import Configuration, InteractionWeights, Obstacle, planar_tip, resolve_shape
from vinedqn.interaction import clearance
from vinedqn.kinematics import chain_positions

FIG = Path(__file__).with_name("figures")
FIG.mkdir(exist_ok=True)

# %% [markdown]
# The tip of an arc of length s and curvature kappa. Negative curvature bends
# toward +x, and kappa -> 0 is a straight line up the y axis.

# %%
for kappa in (0.0, 1e-8, 0.5, -0.5, -0.2):
    print(f"kappa {kappa:+.1e}  tip {tuple(round(v, 6) for v in planar_tip(Configuration(3.2175, kappa)))}")

# %% [markdown]
# A chain of N equal arcs with the same curvature lands on the same tip,
# whatever N is.

# %%
tips = [chain_positions(np.full(n, -0.3), 3.0)[0][-1] for n in (1, 3, 10, 50)]
print("subdivision spread", np.ptp(np.array(tips), axis=0))

# %% [markdown]
# Now a peg of radius 0.5 at (0.6, 2). The commanded curvature is swept from
# 0 to -1.5 on a 3 m body; once the free arc would pass through the peg the
# solver bends the segments around it with the least extra bending energy.

# %%
w = InteractionWeights()
peg = Obstacle((0.6, 2.0), 0.5)
fig, ax = plt.subplots(figsize=(5, 6))
margins = []
for kappa_t in np.linspace(0.0, -1.5, 7):
    report = resolve_shape(kappa_t, 3.0, w, peg)
    pts, _ = chain_positions(report.shape.kappas, 3.0)
    ax.plot(pts[:, 0], pts[:, 1], label=f"{kappa_t:+.2f}")
    margins.append(clearance(report.shape, None, peg, w.robot_radius).min())
ax.add_patch(plt.Circle(peg.center, peg.radius, color="grey", alpha=0.4))
ax.set_aspect("equal")
ax.legend(title="commanded kappa", fontsize=7)
fig.savefig(FIG / "contact_sweep.png", dpi=120)
print("smallest clearance over the sweep", min(margins))
