"""Streaming re-estimation: absorb observations by reweighting the last fit.

The batch stage solves an ordinary cross entropy regression with uniform
priors. Every later observation (or block of observations) is absorbed by a
small solve of the same family: the coefficient rows keep the previous fit as
their prior while the error rows start fresh from uniform weights over a
support row scaled to the incoming data. The update minimizes

    gamma * KL(coefficient rows | previous fit)
    + (1 - gamma) * KL(error rows | uniform)

subject to the block's consistency constraints. At gamma = 0.5 both terms
carry equal weight, which reproduces the plain joint objective; scheduling
gamma toward 1 makes the carried prior progressively stickier.

States are immutable values. Each absorbed block appends one entry to the
entropy ledger, the KL divergence of the new coefficient weights from the
previous ones, a nonnegative account of how much information the block moved.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import JointDistribution, SimplexDistribution, SupportGrid, expectation, kl_divergence
from .simulation import build_error_support
from .solver import (
    GceProblem,
    GceSolution,
    InfeasibleObservationError,
    SolverSettings,
    solve_gce,
)

__all__ = [
    "UpdateSettings",
    "StreamState",
    "StreamReport",
    "init_stream",
    "update_step",
    "block_update",
    "run_stream",
    "entropy_production",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpdateSettings:
    """Streaming knobs: prior stickiness and the inner solver settings.

    ``gamma`` must lie strictly inside (0, 1); the endpoints would freeze the
    coefficient weights entirely or ignore the carried prior. A
    ``gamma_schedule`` supplies one gamma per absorbed block and overrides the
    scalar during ``run_stream``.
    """

    gamma: float = 0.5
    gamma_schedule: tuple[float, ...] | None = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie strictly in (0, 1), got {self.gamma!r}")
        if self.gamma_schedule is not None:
            schedule = tuple(float(g) for g in self.gamma_schedule)
            if not schedule or any(not (0.0 < g < 1.0) for g in schedule):
                raise ValueError("gamma_schedule entries must lie strictly in (0, 1)")
            object.__setattr__(self, "gamma_schedule", schedule)


@dataclass(frozen=True)
class StreamState:
    """Carried coefficient prior plus the running diagnostic logs.

    ``supports`` fixes the coefficient support rows for the whole stream; its
    error rows are whatever the last absorbed problem used (incoming blocks
    supply their own). ``step_index`` counts absorbed observations.
    """

    beta_prior: tuple[SimplexDistribution, ...]
    supports: SupportGrid
    step_index: int
    epsilon_log: tuple[float, ...] = ()
    entropy_ledger: tuple[float, ...] = ()
    beta_trajectory: tuple[np.ndarray, ...] = ()
    converged_log: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        prior = tuple(self.beta_prior)
        if len(prior) != self.supports.n_params or any(
            len(row) != self.supports.n_beta_points for row in prior
        ):
            raise ValueError("beta_prior rows do not match the support grid")
        if self.step_index < 0:
            raise ValueError("step_index must be nonnegative")
        if any(entry < -1e-12 for entry in self.entropy_ledger):
            raise ValueError("entropy ledger entries must be nonnegative")
        object.__setattr__(self, "beta_prior", prior)
        object.__setattr__(self, "epsilon_log", tuple(float(e) for e in self.epsilon_log))
        object.__setattr__(self, "entropy_ledger", tuple(float(e) for e in self.entropy_ledger))
        object.__setattr__(self, "beta_trajectory", tuple(self.beta_trajectory))
        object.__setattr__(self, "converged_log", tuple(bool(c) for c in self.converged_log))

    @classmethod
    def uniform_start(cls, supports: SupportGrid) -> "StreamState":
        """A state with uniform coefficient weights and nothing absorbed yet."""
        prior = tuple(
            SimplexDistribution.uniform(supports.n_beta_points) for _ in range(supports.n_params)
        )
        state = cls(beta_prior=prior, supports=supports, step_index=0)
        return replace(state, beta_trajectory=(state.beta_hat,))

    @property
    def beta_hat(self) -> np.ndarray:
        """Current point estimates: expectations of the carried weights."""
        values = [
            expectation(row, support)
            for row, support in zip(self.beta_prior, self.supports.beta_support)
        ]
        out = np.array(values)
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class StreamReport:
    """Everything a finished stream produced, in arrival order."""

    beta_hat: np.ndarray
    epsilon_hat: np.ndarray
    entropy_ledger: np.ndarray
    beta_trajectory: np.ndarray
    final_state: StreamState
    batch_solution: GceSolution | None
    skipped: tuple[int, ...]
    all_converged: bool
    wallclock_s: float


# ---------------------------------------------------------------------------
# Stream construction and updates
# ---------------------------------------------------------------------------


def init_stream(
    batch: GceProblem, settings: UpdateSettings | None = None
) -> tuple[StreamState, GceSolution]:
    """Solve the opening batch and seed the carried prior with its weights.

    The batch problem must use a uniform prior: the stream's information
    account starts from zero. The batch's error weights are not carried;
    only the coefficient rows persist.
    """
    settings = settings if settings is not None else UpdateSettings()
    uniform = JointDistribution.uniform(batch.supports)
    for fitted, flat in zip(batch.prior.beta_rows, uniform.beta_rows):
        if np.max(np.abs(fitted.weights - flat.weights)) > 1e-12:
            raise ValueError("init_stream requires a uniform batch prior")
    for fitted, flat in zip(batch.prior.error_rows, uniform.error_rows):
        if np.max(np.abs(fitted.weights - flat.weights)) > 1e-12:
            raise ValueError("init_stream requires a uniform batch prior")

    solution = solve_gce(batch, settings.solver)
    state = StreamState(
        beta_prior=solution.distributions.beta_rows,
        supports=batch.supports,
        step_index=batch.n_obs,
        epsilon_log=tuple(solution.epsilon_hat),
        beta_trajectory=(solution.beta_hat,),
        converged_log=(solution.diagnostics.converged,),
    )
    return state, solution


def block_update(
    state: StreamState,
    y_block,
    x_block,
    error_support_rows,
    settings: UpdateSettings | None = None,
) -> StreamState:
    """Absorb a block of observations into the carried prior.

    Builds a block-sized problem whose coefficient prior is the carried one
    and whose error rows are uniform over the supplied support rows, then
    solves it with the gamma-weighted objective. Infeasible blocks raise
    InfeasibleObservationError (indices local to the block) and leave the
    caller's state untouched, so a stream can skip and log them.
    """
    settings = settings if settings is not None else UpdateSettings()
    y = np.asarray(y_block, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(x_block, dtype=float))
    rows = np.atleast_2d(np.asarray(error_support_rows, dtype=float))
    if rows.shape[0] == 1 and y.size > 1:
        rows = np.tile(rows, (y.size, 1))

    grid = SupportGrid(state.supports.beta_support, rows)
    prior = JointDistribution(
        state.beta_prior,
        tuple(SimplexDistribution.uniform(rows.shape[1]) for _ in range(y.size)),
    )
    problem = GceProblem(y, x, grid, prior)
    solution = solve_gce(
        problem,
        settings.solver,
        signal_weight=settings.gamma,
        error_weight=1.0 - settings.gamma,
    )

    new_prior = solution.distributions.beta_rows
    if any(row.weights.min() <= 0.0 for row in new_prior):
        logger.warning(
            "carried prior underflowed to zero on some support points at step %d; "
            "those points are frozen out for the rest of the stream",
            state.step_index,
        )
    moved = sum(kl_divergence(new, old) for new, old in zip(new_prior, state.beta_prior))
    return StreamState(
        beta_prior=new_prior,
        supports=grid,
        step_index=state.step_index + y.size,
        epsilon_log=state.epsilon_log + tuple(solution.epsilon_hat),
        entropy_ledger=state.entropy_ledger + (float(moved),),
        beta_trajectory=state.beta_trajectory + (solution.beta_hat,),
        converged_log=state.converged_log + (solution.diagnostics.converged,),
    )


def update_step(
    state: StreamState,
    y_new: float,
    x_new,
    error_support_row,
    settings: UpdateSettings | None = None,
) -> StreamState:
    """Absorb a single observation; identical to a block of size one."""
    x_row = np.asarray(x_new, dtype=float).reshape(1, -1)
    row = np.asarray(error_support_row, dtype=float).reshape(1, -1)
    return block_update(state, np.array([float(y_new)]), x_row, row, settings)


def entropy_production(state: StreamState) -> list[float]:
    """Per-block KL movement of the carried weights, in absorption order."""
    return list(state.entropy_ledger)


# ---------------------------------------------------------------------------
# Whole-stream driver
# ---------------------------------------------------------------------------


def run_stream(
    y,
    x,
    batch_size: int,
    block_size: int = 1,
    settings: UpdateSettings | None = None,
    *,
    beta_support,
    error_support=None,
    error_points: int = 3,
    error_scale: str = "batch",
) -> StreamReport:
    """Batch-initialize on the first observations, then absorb the rest in order.

    ``beta_support`` is either one support row shared by every coefficient or
    a full (J, K) matrix. The error support row is taken from
    ``error_support`` when given, otherwise built as ``error_points`` equally
    spaced points spanning three sample standard deviations of the batch
    responses (``error_scale="batch"``, the default), of all responses
    (``"full"``), or of every response seen so far, recomputed before each
    block (``"cumulative"``). ``batch_size`` zero skips the batch stage and
    starts from uniform coefficient weights. The final block keeps whatever
    remainder is left when ``block_size`` does not divide the stream.

    Blocks containing infeasible observations are skipped and logged; their
    global indices are reported. Timing covers the whole call.
    """
    t0 = time.perf_counter()
    settings = settings if settings is not None else UpdateSettings()
    y = np.asarray(y, dtype=float).reshape(-1)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = y.size
    if x.shape[0] != n:
        raise ValueError(f"x has {x.shape[0]} rows, y has {n} entries")
    if not 0 <= batch_size <= n:
        raise ValueError(f"batch_size must lie in [0, {n}], got {batch_size}")
    if block_size < 1:
        raise ValueError("block_size must be at least 1")

    beta = np.asarray(beta_support, dtype=float)
    if beta.ndim == 1:
        beta = np.tile(beta, (x.shape[1], 1))
    cumulative = False
    if error_support is not None:
        error_row = np.asarray(error_support, dtype=float).reshape(-1)
    else:
        if error_scale in ("batch", "cumulative"):
            if batch_size < 2:
                raise ValueError(
                    f"error_scale={error_scale!r} needs a batch of at least two "
                    "observations; pass error_support explicitly or use error_scale='full'"
                )
            error_row = build_error_support(y[:batch_size], error_points)
            cumulative = error_scale == "cumulative"
        elif error_scale == "full":
            error_row = build_error_support(y, error_points)
        else:
            raise ValueError(
                f"error_scale must be 'batch', 'cumulative', or 'full', got {error_scale!r}"
            )

    if batch_size >= 1:
        grid = SupportGrid(beta, np.tile(error_row, (batch_size, 1)))
        batch_problem = GceProblem(y[:batch_size], x[:batch_size], grid)
        state, batch_solution = init_stream(batch_problem, settings)
    else:
        state = StreamState.uniform_start(SupportGrid(beta, error_row.reshape(1, -1)))
        batch_solution = None

    starts = list(range(batch_size, n, block_size))
    if settings.gamma_schedule is not None and len(settings.gamma_schedule) < len(starts):
        raise ValueError(
            f"gamma_schedule has {len(settings.gamma_schedule)} entries "
            f"but the stream absorbs {len(starts)} blocks"
        )

    skipped: list[int] = []
    for ordinal, start in enumerate(starts):
        stop = min(start + block_size, n)
        block_settings = settings
        if settings.gamma_schedule is not None:
            block_settings = replace(
                settings, gamma=settings.gamma_schedule[ordinal], gamma_schedule=None
            )
        if cumulative:
            error_row = build_error_support(y[:stop], error_points)
        try:
            state = block_update(
                state, y[start:stop], x[start:stop], error_row, block_settings
            )
        except InfeasibleObservationError as exc:
            offenders = [start + i for i in exc.indices]
            skipped.extend(range(start, stop))
            logger.warning(
                "skipping block %d (observations %d..%d): %s (offending: %s)",
                ordinal,
                start,
                stop - 1,
                exc,
                offenders,
            )

    return StreamReport(
        beta_hat=state.beta_hat,
        epsilon_hat=np.array(state.epsilon_log),
        entropy_ledger=np.array(state.entropy_ledger),
        beta_trajectory=np.vstack(state.beta_trajectory),
        final_state=state,
        batch_solution=batch_solution,
        skipped=tuple(skipped),
        all_converged=all(state.converged_log),
        wallclock_s=time.perf_counter() - t0,
    )
