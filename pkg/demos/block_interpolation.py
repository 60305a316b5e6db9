"""
Block size interpolates between streaming and the one-shot fit
===============================================================

Absorbing observations in blocks of g couples the g constraints inside each
block, so the update sees more context before committing. At g = 1 the
estimator is the pure stream; a single block holding the whole remainder
reproduces the one-shot fit exactly. This sweep shows the error walking
between those two ends as g grows. The walk is a tendency, not a monotone
descent: small blocks couple a few constraints without averaging much noise
and can overshoot the pure stream, while the large-block end lands reliably
close to the one-shot fit.
"""

import numpy as np

from gcestream import SimulationConfig, generate_dataset, rmse, run_stream

BETA_ROW = (-100.0, -50.0, 0.0, 50.0, 100.0)

n = 480
dataset = generate_dataset(SimulationConfig(n=n, seed=314))
design = np.column_stack([np.ones(n), dataset.x])
batch = n // 2

reference = None
print(f"n = {n}, opening batch = {batch}, averaged over 5 datasets\n")
print(" block size    mean rmse    gap to one-shot fit")
for g in (1, 2, 5, 10, 20, 40, n - batch):
    values = []
    gaps = []
    for rep in range(5):
        ds = generate_dataset(SimulationConfig(n=n, seed=314 + rep))
        dsn = np.column_stack([np.ones(n), ds.x])
        report = run_stream(ds.y, dsn, batch_size=batch, block_size=g,
                            beta_support=BETA_ROW)
        stream_rmse = rmse(ds.y, ds.x, report.beta_hat)
        one_shot = run_stream(ds.y, dsn, batch_size=n, beta_support=BETA_ROW)
        base_rmse = rmse(ds.y, ds.x, one_shot.beta_hat)
        values.append(stream_rmse)
        gaps.append(stream_rmse - base_rmse)
    label = "one block" if g == n - batch else f"g = {g}"
    print(f"  {label:>9}    {np.mean(values):9.4f}    {np.mean(gaps):+9.4f}")
