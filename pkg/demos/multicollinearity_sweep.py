"""
Surviving perfect multicollinearity
====================================

Mixing every regressor with a shared common factor makes the columns of the
design matrix progressively more correlated, until at eta = 1 they are
identical and no classical least squares fit exists. The support grid
formulation keeps the problem solvable the whole way: the prior splits the
mass of the unidentified coefficients while the fitted values stay pinned to
the data. The stream pays a price in variance at high correlation, and
standardizing the regressors before streaming recovers much of it, so both
stream variants are shown.
"""

import numpy as np

from gcestream import SimulationConfig, generate_dataset, rmse, run_stream, standardize_columns

BETA_ROW = (-100.0, -50.0, 0.0, 50.0, 100.0)

n = 240
reps = 10
print(f"n = {n}, opening batch = {n // 2}, averaged over {reps} datasets\n")
print("  eta    one-shot    stream    stream(std)")
for eta in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
    one_shot, raw, std = [], [], []
    for rep in range(reps):
        ds = generate_dataset(SimulationConfig(n=n, eta=eta, seed=1000 + rep))
        design = np.column_stack([np.ones(n), ds.x])
        full = run_stream(ds.y, design, batch_size=n, beta_support=BETA_ROW)
        one_shot.append(rmse(ds.y, ds.x, full.beta_hat))

        stream = run_stream(ds.y, design, batch_size=n // 2, beta_support=BETA_ROW)
        raw.append(rmse(ds.y, ds.x, stream.beta_hat))

        # standardize the regressors, stream, then score on the same scale
        x_std, _, _ = standardize_columns(ds.x)
        design_std = np.column_stack([np.ones(n), x_std])
        stream_std = run_stream(ds.y, design_std, batch_size=n // 2,
                                beta_support=BETA_ROW)
        std.append(rmse(ds.y, x_std, stream_std.beta_hat))
    print(f"  {eta:.1f}    {np.mean(one_shot):8.4f}  {np.mean(raw):8.4f}  {np.mean(std):10.4f}")

# at eta = 1 the transformed columns are literally equal, yet the solve
# converges and the coefficient SUM is recovered even though no individual
# slope is identified
ds = generate_dataset(SimulationConfig(n=n, eta=1.0, seed=99))
design = np.column_stack([np.ones(n), ds.x])
full = run_stream(ds.y, design, batch_size=n, beta_support=BETA_ROW)
print("\nat eta = 1 the columns are identical:",
      bool(np.all(ds.x[:, 0] == ds.x[:, 1]) and np.all(ds.x[:, 1] == ds.x[:, 2])))
print("true slope sum:", float(np.sum(ds.true_beta)),
      "  estimated slope sum:", round(float(np.sum(full.beta_hat[1:])), 4))
print("individual slope estimates:", np.round(full.beta_hat[1:], 4))
