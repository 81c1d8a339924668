"""Simulate the five-part agent and look at its movements and tactile data.

Shows how the coordination ratio shapes the joint-angle time courses: at
p_coordination = 0 every joint redraws a target each epoch, at 0.9 joints
stay locked most of the time, and at 1.0 nothing ever moves.

Run:  python demos/01_simulate_agent.py  (writes PNGs next to this script)
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bodyschema import MotionConfig, build_agent, simulate, star_agent_spec

HERE = os.path.dirname(os.path.abspath(__file__))

agent = build_agent(star_agent_spec(160))
print(f"agent: {len(agent.parts)} parts, {len(agent.joints)} joints, "
      f"{agent.n_sensors} sensors")
print("ground-truth tree:", agent.ground_truth_tree)

fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
for ax, p in zip(axes, (0.0, 0.9, 1.0)):
    cfg = MotionConfig(p_coordination=p, seed=2, total_steps=4000,
                       decision_interval=100, controller_gain=19.9)
    log, trace = simulate(agent, cfg, return_motion=True)
    t = np.arange(cfg.total_steps) * cfg.dt
    for j in range(len(agent.joints)):
        ax.plot(t, trace.angles[:, j, 0], lw=0.7)
    ax.set_ylabel(f"p = {p}")
    frac = float((log.raw > 0).mean())
    ax.set_title(f"joint angles (first axis); {frac:.1%} of sensor readings non-zero",
                 fontsize=9)
axes[-1].set_xlabel("time [s]")
fig.tight_layout()
out = os.path.join(HERE, "01_joint_angles.png")
fig.savefig(out, dpi=120)
print("wrote", out)

# a raster of raw pressures for a handful of sensors at p = 0.9
cfg = MotionConfig(p_coordination=0.9, seed=2, total_steps=4000,
                   decision_interval=100, controller_gain=19.9)
log = simulate(agent, cfg)
labels = agent.sensor_part_labels()
pick = np.concatenate([np.flatnonzero(labels == part)[:4] for part in range(5)])
fig, ax = plt.subplots(figsize=(9, 4))
ax.imshow(np.log1p(log.raw[pick]), aspect="auto", cmap="inferno",
          interpolation="nearest")
ax.set_xlabel("time step")
ax.set_ylabel("sensor (4 per part)")
ax.set_title("log(1 + pressure) at p_coordination = 0.9")
fig.tight_layout()
out = os.path.join(HERE, "01_pressure_raster.png")
fig.savefig(out, dpi=120)
print("wrote", out)
