"""
Running a simulation study end to end
======================================

The experiment runner turns a declarative config into a directory of CSV and
JSON reports: one row per (sample size, batch fraction, block size, eta,
method, replication) cell, plus aggregated summaries and ready-to-plot
figure tables. Seeds are derived per cell from the scenario name, so adding
or removing a scenario never changes another scenario's numbers, and reruns
of the same config are byte-identical.
"""

import csv
import tempfile
from pathlib import Path

from gcestream import (
    ExperimentConfig,
    ScenarioConfig,
    SimulationConfig,
    SolverSettings,
    run_experiment,
)

config = ExperimentConfig(
    scenarios=(
        ScenarioConfig(
            name="clean",
            simulation=SimulationConfig(n=120),
            batch_fractions=(0.5,),
            block_sizes=(1, 10),
        ),
        ScenarioConfig(
            name="collinear",
            simulation=SimulationConfig(n=60),
            eta_grid=(0.0, 1.0),
            batch_fractions=(0.5,),
            block_sizes=(1,),
            run_std=True,
        ),
    ),
    replications=5,
    seed_base=2024,
    solver=SolverSettings(),
)

out_dir = Path(tempfile.mkdtemp(prefix="gcestream_demo_"))
outcome = run_experiment(config, out_dir=out_dir)
print("exit code:", outcome.exit_code)
print("files written:")
for path in outcome.written:
    print("  ", path)

# the summary table aggregates replications per cell
with open(out_dir / "summary.csv", newline="") as handle:
    rows = list(csv.DictReader(handle))
print(f"\nsummary has {len(rows)} cells; mean rmse per method at eta=0:")
for row in rows:
    if float(row["eta"]) == 0.0 and row["n"] == "120":
        g = f" g={row['g']}" if row["g"] else ""
        print(f"  {row['method']:>14}{g:>6}  rmse {float(row['rmse_mean']):.4f}"
              f"  ({row['replications']} reps, converged_all={row['converged_all']})")
