"""Run the full sweep pipeline on a reduced desk configuration.

Executes simulate -> quantize -> metric -> MDS -> chains -> evaluation for
p_coordination in {0.0, 0.9, 1.0} and prints the collated summary: clustering
stays good for any p < 1, but tree recovery needs coordinated movement.

Equivalent CLI:  bodyschema run --preset desk --out out/desk

Run:  python demos/04_full_pipeline.py   (a few minutes)
"""

import os
import tempfile

from bodyschema import ExperimentConfig, run_pipeline, star_agent_spec

out_dir = os.environ.get("DEMO_OUT", os.path.join(tempfile.gettempdir(),
                                                  "bodyschema_demo"))
cfg = ExperimentConfig(
    out_dir=out_dir,
    agent_spec=star_agent_spec(160),
    dims=[14],
    p_values=[0.0, 0.9, 1.0],
    seeds=[2],
    total_steps=20_000,
    decision_interval=100,
    controller_gain=19.9,
    iterations=600,
    burn_in=300,
    chains=5,
)
manifest = run_pipeline(cfg)
print(f"{manifest['n_reports']} reports, {len(manifest['errors'])} errors")
print("summary:")
with open(manifest["summary"]) as fh:
    for line in fh:
        print("  " + line.rstrip())
print("artifacts and CSVs under", out_dir)
