"""Build a body map: tactile log -> information metric -> classical MDS.

The pairwise distance between two quantized sensor channels is the sum of
their conditional entropies, which is small for sensors that move together.
MDS embeds those distances; sensors on the same body part land close to each
other even though nothing about the body's geometry went in.

Run:  python demos/02_body_map.py
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bodyschema import (DistanceMatrix, MotionConfig, build_agent,
                        information_metric, mds_embed, quantize, simulate,
                        star_agent_spec)

HERE = os.path.dirname(os.path.abspath(__file__))

agent = build_agent(star_agent_spec(160))
labels = agent.sensor_part_labels()
cfg = MotionConfig(p_coordination=0.9, seed=2, total_steps=20_000,
                   decision_interval=100, controller_gain=19.9)
log = quantize(simulate(agent, cfg), 10)
dist = information_metric(log)
print("distance matrix:", dist.d_matrix.shape,
      f"max {dist.d_matrix.max():.2f} bits")

bmap = mds_embed(dist, 14)
print("top eigenvalues:", np.round(bmap.eigen_spectrum[:8], 3))

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
part_names = [p.id for p in agent.parts]
for part in range(5):
    pts = bmap.points[labels == part]
    axes[0].scatter(pts[:, 0], pts[:, 1], s=14, label=part_names[part])
axes[0].legend(fontsize=8)
axes[0].set_title("body map, first two MDS coordinates")
axes[0].set_xlabel("coordinate 1")
axes[0].set_ylabel("coordinate 2")

axes[1].plot(np.arange(1, 17), bmap.eigen_spectrum[:16], "o-")
axes[1].set_title("MDS eigenvalue spectrum")
axes[1].set_xlabel("component")
axes[1].set_ylabel("eigenvalue")
fig.tight_layout()
out = os.path.join(HERE, "02_body_map.png")
fig.savefig(out, dpi=120)
print("wrote", out)
