import logging
import math

import numpy as np
import pytest

import oracles
from gcestream import (
    GceProblem,
    InfeasibleObservationError,
    JointDistribution,
    SimplexDistribution,
    StreamState,
    SupportGrid,
    UpdateSettings,
    block_update,
    entropy_production,
    init_stream,
    kl_divergence,
    rmse,
    run_stream,
    solve_gce,
    update_step,
)

rng = np.random.default_rng(60646)

BETA_ROW = [-10.0, -5.0, 0.0, 5.0, 10.0]


def simulated(n, seed, n_regressors=2, noise=1.0):
    local = np.random.default_rng(seed)
    x = local.uniform(0.0, 20.0, size=(n, n_regressors))
    slopes = np.array([1.5, -0.5, 2.0][:n_regressors])
    y = 1.0 + x @ slopes + local.normal(0.0, noise, size=n)
    design = np.column_stack([np.ones(n), x])
    return y, design


def batch_problem(y, design, error_row=None):
    if error_row is None:
        sd = float(np.std(y, ddof=1))
        error_row = [-3.0 * sd, 0.0, 3.0 * sd]
    grid = SupportGrid.tiled(BETA_ROW, design.shape[1], error_row, len(y))
    return GceProblem(y, design, grid), np.asarray(error_row, dtype=float)


# ---------------------------------------------------------------------------
# init_stream
# ---------------------------------------------------------------------------


def test_init_stream_single_observation_batch():
    grid = SupportGrid(np.array([[0.0, 1.0]]), np.array([[-1.0, 1.0]]))
    batch = GceProblem(np.array([0.4]), np.array([[1.0]]), grid)
    state, solution = init_stream(batch)
    direct = solve_gce(batch)
    np.testing.assert_allclose(
        np.vstack([r.weights for r in state.beta_prior]),
        direct.distributions.beta_matrix(),
        atol=1e-12,
    )
    assert state.step_index == 1
    assert state.epsilon_log == tuple(solution.epsilon_hat)
    assert state.entropy_ledger == ()


def test_init_stream_consistent_batch_keeps_uniform_weights():
    # symmetric supports and y = 0 mean the uniform weights already satisfy
    # every constraint
    design = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    grid = SupportGrid.tiled([-1.0, 1.0], 2, [-2.0, 2.0], 3)
    batch = GceProblem(np.zeros(3), design, grid)
    state, solution = init_stream(batch)
    np.testing.assert_allclose(
        np.vstack([r.weights for r in state.beta_prior]), 0.5, atol=1e-10
    )
    assert solution.objective_value <= 1e-12
    assert state.entropy_ledger == ()


def test_init_stream_rejects_non_uniform_prior():
    grid = SupportGrid(np.array([[0.0, 1.0]]), np.array([[-1.0, 1.0]]))
    prior = JointDistribution.from_matrices(np.array([[0.7, 0.3]]), np.array([[0.5, 0.5]]))
    batch = GceProblem(np.array([0.4]), np.array([[1.0]]), grid, prior)
    with pytest.raises(ValueError, match="uniform batch prior"):
        init_stream(batch)


# ---------------------------------------------------------------------------
# update_step
# ---------------------------------------------------------------------------


def stream_after_batch(n=20, batch=8, seed=11):
    y, design = simulated(n, seed)
    problem, error_row = batch_problem(y[:batch], design[:batch])
    state, _ = init_stream(problem)
    return state, y, design, error_row


def test_consistent_observation_moves_nothing():
    state, y, design, error_row = stream_after_batch()
    x_new = design[10]
    y_new = float(x_new @ state.beta_hat)  # symmetric error row, zero mean
    updated = update_step(state, y_new, x_new, error_row)
    assert updated.entropy_ledger[-1] <= 1e-12
    np.testing.assert_allclose(updated.beta_hat, state.beta_hat, atol=1e-9)
    assert updated.epsilon_log[-1] == pytest.approx(0.0, abs=1e-9)


def test_first_update_from_uniform_equals_single_solve():
    grid = SupportGrid.tiled(BETA_ROW, 2, [-4.0, 0.0, 4.0], 1)
    state = StreamState.uniform_start(grid)
    x_new = np.array([1.0, 2.0])
    updated = update_step(state, 3.0, x_new, [-4.0, 0.0, 4.0])
    direct = solve_gce(GceProblem(np.array([3.0]), x_new.reshape(1, -1), grid))
    np.testing.assert_allclose(updated.beta_hat, direct.beta_hat, atol=1e-8)


def test_single_update_matches_scalar_bisection_oracle():
    grid = SupportGrid(np.array([[0.0, 1.0]]), np.array([[-1.0, 1.0]]))
    batch = GceProblem(np.array([0.4]), np.array([[1.0]]), grid)
    state, _ = init_stream(batch)
    settings = UpdateSettings(gamma=0.5)
    updated = update_step(state, 0.7, [1.0], [-1.0, 1.0], settings)

    qb = np.vstack([r.weights for r in state.beta_prior])
    lam = oracles.bisect_scalar_multiplier(
        0.7, [1.0], grid.beta_support, qb, np.array([-1.0, 1.0]), np.full(2, 0.5),
        wb=0.5, we=0.5,
    )
    tilt = qb[0] * np.exp(-grid.beta_support[0] * 1.0 * lam / 0.5)
    beta_oracle = float((tilt / tilt.sum()) @ grid.beta_support[0])
    assert updated.beta_hat[0] == pytest.approx(beta_oracle, abs=1e-8)


def test_gamma_half_matches_unweighted_objective():
    state, y, design, error_row = stream_after_batch(seed=21)
    x_new, y_new = design[9], y[9]
    updated = update_step(state, y_new, x_new, error_row, UpdateSettings(gamma=0.5))

    grid = SupportGrid(state.supports.beta_support, error_row.reshape(1, -1))
    prior = JointDistribution(
        state.beta_prior, (SimplexDistribution.uniform(error_row.size),)
    )
    plain = solve_gce(GceProblem(np.array([y_new]), x_new.reshape(1, -1), grid, prior))
    np.testing.assert_allclose(updated.beta_hat, plain.beta_hat, atol=1e-8)


def test_infeasible_update_raises_and_leaves_state_usable():
    state, y, design, error_row = stream_after_batch()
    with pytest.raises(InfeasibleObservationError):
        update_step(state, 1e7, design[12], error_row)
    # the original value still works afterwards
    after = update_step(state, y[12], design[12], error_row)
    assert after.step_index == state.step_index + 1


# ---------------------------------------------------------------------------
# block_update
# ---------------------------------------------------------------------------


def test_block_of_one_equals_update_step():
    state, y, design, error_row = stream_after_batch(seed=31)
    via_step = update_step(state, y[8], design[8], error_row)
    via_block = block_update(state, y[8:9], design[8:9], error_row.reshape(1, -1))
    np.testing.assert_allclose(
        np.vstack([r.weights for r in via_step.beta_prior]),
        np.vstack([r.weights for r in via_block.beta_prior]),
        atol=1e-12,
    )
    assert via_step.epsilon_log == via_block.epsilon_log
    assert abs(via_step.entropy_ledger[-1] - via_block.entropy_ledger[-1]) <= 1e-12


def test_single_block_of_everything_is_the_batch_solve():
    y, design = simulated(24, seed=41)
    problem, error_row = batch_problem(y, design)
    state = StreamState.uniform_start(problem.supports)
    updated = block_update(state, y, design, np.tile(error_row, (24, 1)))
    direct = solve_gce(problem)
    np.testing.assert_allclose(updated.beta_hat, direct.beta_hat, atol=1e-6)


def test_block_infeasibility_reports_local_indices():
    state, y, design, error_row = stream_after_batch(seed=51)
    y_block = np.array([y[8], 1e7, y[10]])
    with pytest.raises(InfeasibleObservationError) as info:
        block_update(state, y_block, design[8:11], error_row.reshape(1, -1))
    assert info.value.indices == (1,)


# ---------------------------------------------------------------------------
# entropy ledger
# ---------------------------------------------------------------------------


def test_ledger_empty_without_updates():
    grid = SupportGrid.tiled(BETA_ROW, 2, [-4.0, 0.0, 4.0], 1)
    assert entropy_production(StreamState.uniform_start(grid)) == []


def test_ledger_entries_recompute_from_stored_states():
    state, y, design, error_row = stream_after_batch(n=16, batch=6, seed=61)
    states = [state]
    for i in range(6, 12):
        states.append(update_step(states[-1], y[i], design[i], error_row))
    for step, (before, after) in enumerate(zip(states, states[1:]), start=1):
        recomputed = sum(
            kl_divergence(new, old)
            for new, old in zip(after.beta_prior, before.beta_prior)
        )
        assert after.entropy_ledger[-1] == pytest.approx(recomputed, abs=1e-15)
        assert len(after.entropy_ledger) == step
    assert all(e >= -1e-12 for e in states[-1].entropy_ledger)


def test_ledger_rejects_negative_entries():
    grid = SupportGrid.tiled(BETA_ROW, 2, [-4.0, 0.0, 4.0], 1)
    state = StreamState.uniform_start(grid)
    with pytest.raises(ValueError, match="nonnegative"):
        StreamState(
            beta_prior=state.beta_prior,
            supports=grid,
            step_index=1,
            entropy_ledger=(-1e-6,),
        )


def test_prior_weights_stay_positive_through_updates():
    state, y, design, error_row = stream_after_batch(n=30, batch=10, seed=71)
    for i in range(10, 30):
        state = update_step(state, y[i], design[i], error_row)
    for row in state.beta_prior:
        assert row.weights.min() > 0.0


def test_error_prior_resets_each_step():
    # replaying an update from a state stripped of its history gives the same
    # answer: only (y, x, carried weights) matter
    state, y, design, error_row = stream_after_batch(n=18, batch=8, seed=81)
    for i in range(8, 13):
        state = update_step(state, y[i], design[i], error_row)
    bare = StreamState(
        beta_prior=state.beta_prior, supports=state.supports, step_index=state.step_index
    )
    a = update_step(state, y[13], design[13], error_row)
    b = update_step(bare, y[13], design[13], error_row)
    np.testing.assert_allclose(
        np.vstack([r.weights for r in a.beta_prior]),
        np.vstack([r.weights for r in b.beta_prior]),
        atol=1e-12,
    )
    assert a.epsilon_log[-1] == pytest.approx(b.epsilon_log[-1], abs=1e-12)


# ---------------------------------------------------------------------------
# run_stream
# ---------------------------------------------------------------------------


def test_batch_of_everything_reproduces_one_shot_solve():
    y, design = simulated(20, seed=91)
    problem, error_row = batch_problem(y, design)
    report = run_stream(y, design, batch_size=20, beta_support=BETA_ROW)
    direct = solve_gce(problem)
    np.testing.assert_allclose(report.beta_hat, direct.beta_hat, atol=1e-12)
    assert report.entropy_ledger.size == 0
    assert report.skipped == ()
    assert report.all_converged


def test_reversed_stream_changes_the_answer():
    y, design = simulated(48, seed=101)
    fwd = run_stream(y, design, batch_size=12, beta_support=BETA_ROW)
    y_rev = np.concatenate([y[:12], y[12:][::-1]])
    x_rev = np.vstack([design[:12], design[12:][::-1]])
    rev = run_stream(y_rev, x_rev, batch_size=12, beta_support=BETA_ROW)
    assert np.max(np.abs(fwd.beta_hat - rev.beta_hat)) > 1e-6


def test_block_size_covers_ragged_tail():
    y, design = simulated(23, seed=111)
    report = run_stream(y, design, batch_size=10, block_size=5, beta_support=BETA_ROW)
    # 13 streamed observations in blocks of 5 -> 5, 5, 3
    assert report.entropy_ledger.size == 3
    assert report.epsilon_hat.size == 23
    assert report.final_state.step_index == 23
    assert report.beta_trajectory.shape == (4, design.shape[1])


def test_skipped_blocks_report_global_indices(caplog):
    y, design = simulated(20, seed=121)
    y = y.copy()
    y[15] = 1e8
    with caplog.at_level(logging.WARNING, logger="gcestream.streaming"):
        report = run_stream(y, design, batch_size=10, block_size=2, beta_support=BETA_ROW)
    assert report.skipped == (14, 15)
    assert any("15" in message for message in caplog.messages)
    assert np.all(np.isfinite(report.beta_hat))


def test_gamma_schedule_is_consumed_per_block():
    y, design = simulated(16, seed=131)
    sticky = run_stream(
        y, design, batch_size=8,
        settings=UpdateSettings(gamma=0.5, gamma_schedule=(0.9,) * 8),
        beta_support=BETA_ROW,
    )
    loose = run_stream(
        y, design, batch_size=8,
        settings=UpdateSettings(gamma=0.5, gamma_schedule=(0.1,) * 8),
        beta_support=BETA_ROW,
    )
    # a near-one gamma makes the carried weights expensive to move
    assert sticky.entropy_ledger.sum() < loose.entropy_ledger.sum()


def test_gamma_schedule_too_short_is_rejected():
    y, design = simulated(16, seed=141)
    with pytest.raises(ValueError, match="gamma_schedule"):
        run_stream(
            y, design, batch_size=8,
            settings=UpdateSettings(gamma_schedule=(0.5, 0.5)),
            beta_support=BETA_ROW,
        )


def test_zero_batch_needs_explicit_or_full_error_scale():
    y, design = simulated(12, seed=151)
    with pytest.raises(ValueError, match="error_scale"):
        run_stream(y, design, batch_size=0, beta_support=BETA_ROW)
    report = run_stream(y, design, batch_size=0, beta_support=BETA_ROW, error_scale="full")
    assert report.batch_solution is None
    assert report.final_state.step_index == 12


def test_cumulative_error_scale_tracks_observed_spread():
    y, design = simulated(30, seed=161)
    fixed = run_stream(y, design, batch_size=10, beta_support=BETA_ROW)
    cumulative = run_stream(
        y, design, batch_size=10, beta_support=BETA_ROW, error_scale="cumulative"
    )
    assert cumulative.final_state.step_index == 30
    # widths differ, so the fitted paths cannot coincide
    assert np.max(np.abs(fixed.beta_hat - cumulative.beta_hat)) > 0.0


def test_streaming_underperforms_batch_when_badly_initialized():
    # tiny batch, long stream: the one-shot fit should beat the stream
    local = np.random.default_rng(7)
    x = local.uniform(0.0, 20.0, size=(64, 3))
    y = 1.0 + x @ np.array([1.0, -2.0, 3.0]) + local.normal(0.0, 1.0, size=64)
    design = np.column_stack([np.ones(64), x])
    sd = float(np.std(y, ddof=1))
    grid = SupportGrid.tiled([-100.0, -50.0, 0.0, 50.0, 100.0], 4, [-3 * sd, 0.0, 3 * sd], 64)
    direct = solve_gce(GceProblem(y, design, grid))
    stream = run_stream(
        y, design, batch_size=4, beta_support=[-100.0, -50.0, 0.0, 50.0, 100.0],
        error_support=[-3 * sd, 0.0, 3 * sd],
    )
    gce_rmse = rmse(y, x, direct.beta_hat)
    stre_rmse = rmse(y, x, stream.beta_hat)
    assert stre_rmse > gce_rmse


# ---------------------------------------------------------------------------
# settings validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_gamma_must_be_strictly_interior(gamma):
    with pytest.raises(ValueError):
        UpdateSettings(gamma=gamma)


def test_gamma_schedule_entries_validated():
    with pytest.raises(ValueError):
        UpdateSettings(gamma_schedule=(0.5, 1.0))
    with pytest.raises(ValueError):
        UpdateSettings(gamma_schedule=())
