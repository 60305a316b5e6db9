"""Cross entropy regression solved through its smooth dual.

The primal problem picks simplex weights for every coefficient row and every
error row, minimizing KL divergence from a prior subject to the m linear
consistency constraints

    y_i = sum_j beta_hat_j * x_ij + eps_hat_i,

where each hat quantity is the expectation of its row's weights over the
row's support points. Eliminating the weights yields an unconstrained convex
dual in the m Lagrange multipliers: the optimal weights have Gibbs form

    p_jk  proportional to  q_jk * exp(-z_jk * theta_j),   theta = x^T lam,
    p_ih  proportional to  q_ih * exp(-z_ih * lam_i),

and the dual objective is a sum of log partition terms. Its gradient is the
constraint residual, so the solver is a safeguarded Newton iteration driven to
max |residual| <= tolerance. All partition sums are evaluated in the log
domain (per-row max subtraction), which keeps exponents of order 1e5 finite.

The same machinery also minimizes the reweighted objective
``signal_weight * KL(beta rows) + error_weight * KL(error rows)`` used by the
streaming updates; the plain problem is the 1/1 special case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    ZERO_CLAMP,
    JointDistribution,
    SupportGrid,
    kl_divergence,
)

__all__ = [
    "InfeasibleObservationError",
    "SolverSettings",
    "SolverDiagnostics",
    "GceProblem",
    "GceSolution",
    "gibbs_weights",
    "dual_objective",
    "solve_gce",
]

# Armijo line search constants for the multi-constraint Newton path.
_ARMIJO_SLOPE = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 60

# Relative ridge added to the Hessian diagonal when the plain system fails.
_RIDGE_SCALE = 1e-10


class InfeasibleObservationError(ValueError):
    """Raised when observed values cannot be reproduced from the support hulls.

    ``indices`` lists the offending observations. ``boundary`` distinguishes
    values sitting exactly on the hull edge (reachable only by degenerate
    point masses, so still rejected) from values strictly outside it.
    """

    def __init__(self, indices, lo, hi, boundary: bool = False):
        self.indices = tuple(int(i) for i in indices)
        self.boundary = bool(boundary)
        where = ", ".join(str(i) for i in self.indices)
        if boundary:
            msg = (
                f"observation(s) {where} lie exactly on the attainable hull boundary "
                f"[{lo!r}, {hi!r}] and would force degenerate point masses"
            )
        else:
            msg = f"observation(s) {where} fall outside the attainable hull [{lo!r}, {hi!r}]"
        super().__init__(msg)


@dataclass(frozen=True)
class SolverSettings:
    """Dual solver knobs: residual tolerance and iteration cap."""

    constraint_tolerance: float = 1e-8
    max_iterations: int = 500

    def __post_init__(self) -> None:
        if not (self.constraint_tolerance > 0.0 and math.isfinite(self.constraint_tolerance)):
            raise ValueError("constraint_tolerance must be a positive finite number")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    max_residual: float
    converged: bool


@dataclass(frozen=True)
class GceProblem:
    """One regression instance: data, support grid, and prior weights.

    ``y`` has m entries, ``x`` is m-by-J (any constant column for an intercept
    is just another regressor). The prior defaults to uniform rows. Each y_i
    must lie strictly inside the interval reachable by the constraint right
    hand side when the row weights range over the prior's support (support
    points carrying zero prior weight cannot be reached and do not count).
    """

    y: np.ndarray
    x: np.ndarray
    supports: SupportGrid
    prior: JointDistribution = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float).reshape(-1)
        x = np.atleast_2d(np.array(self.x, dtype=float))
        if y.size < 1:
            raise ValueError("need at least one observation")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
            raise ValueError("y and x must be finite")
        if x.shape[0] != y.size:
            raise ValueError(f"x has {x.shape[0]} rows, y has {y.size} entries")
        if self.supports.n_obs != y.size:
            raise ValueError(
                f"support grid covers {self.supports.n_obs} observations, data has {y.size}"
            )
        if self.supports.n_params != x.shape[1]:
            raise ValueError(
                f"support grid covers {self.supports.n_params} coefficients, "
                f"x has {x.shape[1]} columns"
            )
        prior = self.prior if self.prior is not None else JointDistribution.uniform(self.supports)
        if not prior.matches_grid(self.supports):
            raise ValueError("prior rows do not match the support grid dimensions")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "prior", prior)
        self._check_feasibility()

    @property
    def n_obs(self) -> int:
        return int(self.y.size)

    @property
    def n_params(self) -> int:
        return int(self.x.shape[1])

    def _check_feasibility(self) -> None:
        zb = self.supports.beta_support
        ze = self.supports.error_support
        qb = self.prior.beta_matrix()
        qe = self.prior.error_matrix()
        # Support points with zero prior weight are unreachable at finite KL.
        bmin = np.where(qb > 0.0, zb, np.inf).min(axis=1)
        bmax = np.where(qb > 0.0, zb, -np.inf).max(axis=1)
        emin = np.where(qe > 0.0, ze, np.inf).min(axis=1)
        emax = np.where(qe > 0.0, ze, -np.inf).max(axis=1)
        lo = np.minimum(self.x * bmin, self.x * bmax).sum(axis=1) + emin
        hi = np.maximum(self.x * bmin, self.x * bmax).sum(axis=1) + emax
        outside = (self.y < lo) | (self.y > hi)
        if np.any(outside):
            idx = np.flatnonzero(outside)
            raise InfeasibleObservationError(idx, lo[idx[0]], hi[idx[0]], boundary=False)
        on_edge = (self.y == lo) | (self.y == hi)
        if np.any(on_edge):
            idx = np.flatnonzero(on_edge)
            raise InfeasibleObservationError(idx, lo[idx[0]], hi[idx[0]], boundary=True)


@dataclass(frozen=True)
class GceSolution:
    """Fitted weights plus the point estimates they imply.

    ``objective_value`` is the achieved (possibly reweighted) KL divergence
    from the prior. ``beta_hat`` and ``epsilon_hat`` are the expectations of
    the fitted rows over their support points.
    """

    distributions: JointDistribution
    multipliers: np.ndarray
    beta_hat: np.ndarray
    epsilon_hat: np.ndarray
    objective_value: float
    diagnostics: SolverDiagnostics


# ---------------------------------------------------------------------------
# Dual evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _DualPoint:
    """Everything the iteration needs at one multiplier vector."""

    value: float
    grad: np.ndarray
    pb: np.ndarray  # (J, K) coefficient row weights
    pe: np.ndarray  # (m, H) error row weights
    beta_hat: np.ndarray
    eps_hat: np.ndarray
    curv_beta: np.ndarray  # per-coefficient Hessian contribution
    curv_eps: np.ndarray  # per-observation Hessian contribution


class _DualEvaluator:
    """Precomputed log-priors and supports for repeated dual evaluations.

    The reported value is measured relative to uniform rows: it carries a
    constant offset of sum(log row sizes), so at zero multipliers with a
    uniform prior the value is J*log(K) + m*log(H), and at the optimum the
    achieved KL divergence equals that constant minus the minimal value.
    """

    def __init__(self, problem: GceProblem, signal_weight: float, error_weight: float):
        self.y = problem.y
        self.x = problem.x
        self.zb = problem.supports.beta_support
        self.ze = problem.supports.error_support
        qb = problem.prior.beta_matrix()
        qe = problem.prior.error_matrix()
        self.log_qb = np.where(qb >= ZERO_CLAMP, np.log(np.maximum(qb, ZERO_CLAMP)), -np.inf)
        self.log_qe = np.where(qe >= ZERO_CLAMP, np.log(np.maximum(qe, ZERO_CLAMP)), -np.inf)
        self.wb = float(signal_weight)
        self.we = float(error_weight)
        j, k = self.zb.shape
        m, h = self.ze.shape
        self.offset = self.wb * j * math.log(k) + self.we * m * math.log(h)

    def evaluate(self, lam: np.ndarray) -> _DualPoint:
        theta = self.x.T @ lam
        logits_b = self.log_qb - self.zb * (theta / self.wb)[:, None]
        ln_zb = logsumexp(logits_b, axis=1)
        pb = np.exp(logits_b - ln_zb[:, None])
        beta_hat = (pb * self.zb).sum(axis=1)
        curv_beta = (pb * (self.zb - beta_hat[:, None]) ** 2).sum(axis=1) / self.wb

        logits_e = self.log_qe - self.ze * (lam / self.we)[:, None]
        ln_ze = logsumexp(logits_e, axis=1)
        pe = np.exp(logits_e - ln_ze[:, None])
        eps_hat = (pe * self.ze).sum(axis=1)
        curv_eps = (pe * (self.ze - eps_hat[:, None]) ** 2).sum(axis=1) / self.we

        for name, ln_z in (("coefficient", ln_zb), ("error", ln_ze)):
            bad = ~np.isfinite(ln_z)
            if np.any(bad):
                raise ValueError(
                    f"non-finite partition sum in {name} row {int(np.flatnonzero(bad)[0])}"
                )
        value = float(lam @ self.y + self.wb * ln_zb.sum() + self.we * ln_ze.sum() + self.offset)
        grad = self.y - self.x @ beta_hat - eps_hat
        return _DualPoint(value, grad, pb, pe, beta_hat, eps_hat, curv_beta, curv_eps)


def _as_multipliers(multipliers, n_obs: int) -> np.ndarray:
    lam = np.asarray(multipliers, dtype=float).reshape(-1)
    if lam.size != n_obs:
        raise ValueError(f"expected {n_obs} multipliers, got {lam.size}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    return lam


def _check_weights(signal_weight: float, error_weight: float) -> None:
    for name, w in (("signal_weight", signal_weight), ("error_weight", error_weight)):
        if not (w > 0.0 and math.isfinite(w)):
            raise ValueError(f"{name} must be a positive finite number")


# ---------------------------------------------------------------------------
# Newton iterations
# ---------------------------------------------------------------------------


def _normal_solve(x: np.ndarray, vb: np.ndarray, ve: np.ndarray, grad: np.ndarray):
    """Solve (x diag(vb) x^T + diag(ve)) d = grad through the J-by-J system.

    The Hessian is a rank-J update of a diagonal, so the Woodbury identity
    reduces the solve to the coefficient dimension regardless of m. Returns
    None when the small system is numerically unusable.
    """
    u = grad / ve
    active = vb > 0.0
    if not np.any(active):
        return u
    xa = x[:, active]
    cmat = np.diag(1.0 / vb[active]) + xa.T @ (xa / ve[:, None])
    rhs = xa.T @ u
    if not (np.all(np.isfinite(cmat)) and np.all(np.isfinite(rhs))):
        return None
    try:
        w = np.linalg.solve(cmat, rhs)
    except np.linalg.LinAlgError:
        return None
    return u - (xa @ w) / ve


def _solve_multi(ev: _DualEvaluator, settings: SolverSettings):
    """Damped Newton with a ridge retry and a gradient fallback."""
    lam = np.zeros(ev.y.size)
    pt = ev.evaluate(lam)
    tol = settings.constraint_tolerance
    iterations = 0
    while iterations < settings.max_iterations and np.max(np.abs(pt.grad)) > tol:
        candidates = []
        if np.all(pt.curv_eps > 0.0):
            candidates.append(pt.curv_eps)
        diag = (ev.x * ev.x) @ pt.curv_beta + pt.curv_eps
        scale = float(diag.max()) if diag.size and diag.max() > 0.0 else 1.0
        candidates.append(pt.curv_eps + _RIDGE_SCALE * scale)

        direction = None
        for ve in candidates:
            d = _normal_solve(ev.x, pt.curv_beta, ve, pt.grad)
            if d is not None and np.all(np.isfinite(d)) and float(pt.grad @ d) > 0.0:
                direction = -d
                break
        if direction is None:
            direction = -pt.grad

        slope = float(pt.grad @ direction)
        step = 1.0
        accepted = None
        for _ in range(_MAX_BACKTRACKS):
            trial = lam + step * direction
            cand = ev.evaluate(trial)
            if cand.value <= pt.value + _ARMIJO_SLOPE * step * slope:
                accepted = (trial, cand)
                break
            step *= _BACKTRACK
        if accepted is None:
            break  # no further decrease representable
        lam, pt = accepted
        iterations += 1
    return lam, pt, iterations


def _solve_scalar(ev: _DualEvaluator, settings: SolverSettings):
    """Single-constraint case: Newton steps safeguarded by a sign bracket.

    The dual gradient is increasing in the lone multiplier, so once values of
    opposite sign have been seen the root is bracketed and any Newton proposal
    escaping the bracket is replaced by its midpoint.
    """
    tol = settings.constraint_tolerance
    lam = 0.0
    pt = ev.evaluate(np.array([lam]))
    lo = hi = None
    iterations = 0
    while iterations < settings.max_iterations and abs(pt.grad[0]) > tol:
        g = float(pt.grad[0])
        if g < 0.0:
            lo = lam
        else:
            hi = lam
        h = float((ev.x[0] ** 2) @ pt.curv_beta + pt.curv_eps[0])
        cand = lam - g / h if h > 0.0 and math.isfinite(h) else None
        if lo is not None and hi is not None:
            if cand is None or not (lo < cand < hi) or not math.isfinite(cand):
                cand = 0.5 * (lo + hi)
        else:
            trust = 8.0 * (1.0 + abs(lam))
            if cand is None or not math.isfinite(cand):
                cand = lam + (trust if g < 0.0 else -trust)
            else:
                cand = float(np.clip(cand, lam - trust, lam + trust))
        if cand == lam:
            break  # bracket collapsed to machine resolution
        lam = cand
        pt = ev.evaluate(np.array([lam]))
        iterations += 1
    return np.array([lam]), pt, iterations


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def gibbs_weights(
    multipliers,
    problem: GceProblem,
    *,
    signal_weight: float = 1.0,
    error_weight: float = 1.0,
) -> JointDistribution:
    """Row weights implied by the given multipliers; the prior at zero.

    Coefficient row j gets weights proportional to
    ``q_jk * exp(-z_jk * sum_i x_ij * lam_i / signal_weight)`` and error row i
    to ``q_ih * exp(-z_ih * lam_i / error_weight)``, normalized per row.
    """
    _check_weights(signal_weight, error_weight)
    lam = _as_multipliers(multipliers, problem.n_obs)
    pt = _DualEvaluator(problem, signal_weight, error_weight).evaluate(lam)
    return JointDistribution.from_matrices(pt.pb, pt.pe)


def dual_objective(multipliers, problem: GceProblem) -> tuple[float, np.ndarray]:
    """Value and gradient of the convex dual at the given multipliers.

    The gradient entry for observation i is the constraint residual
    ``y_i - (prediction_i + error_expectation_i)`` under the Gibbs weights, so
    a zero gradient certifies the fitted weights satisfy the constraints. The
    value is offset so that a uniform prior at zero multipliers scores
    J*log(K) + m*log(H).
    """
    lam = _as_multipliers(multipliers, problem.n_obs)
    pt = _DualEvaluator(problem, 1.0, 1.0).evaluate(lam)
    return pt.value, pt.grad


def solve_gce(
    problem: GceProblem,
    settings: SolverSettings | None = None,
    *,
    signal_weight: float = 1.0,
    error_weight: float = 1.0,
) -> GceSolution:
    """Minimize KL divergence from the prior subject to the data constraints.

    Runs safeguarded Newton on the dual from a zero start: Woodbury-reduced
    Newton systems with a relative ridge retry and a gradient fallback for
    m >= 2, bracketed Newton/bisection for the single-observation case the
    streaming updates hit. Non-convergence within the iteration cap is
    reported through ``diagnostics.converged`` rather than raised.

    With ``signal_weight``/``error_weight`` the minimized objective becomes
    ``signal_weight * KL(coefficient rows) + error_weight * KL(error rows)``;
    the weights rescale the objective without moving its minimizer when equal.
    """
    settings = settings if settings is not None else SolverSettings()
    _check_weights(signal_weight, error_weight)
    ev = _DualEvaluator(problem, signal_weight, error_weight)
    if problem.n_obs == 1:
        lam, pt, iterations = _solve_scalar(ev, settings)
    else:
        lam, pt, iterations = _solve_multi(ev, settings)

    distributions = JointDistribution.from_matrices(pt.pb, pt.pe)
    objective = signal_weight * sum(
        kl_divergence(p, q) for p, q in zip(distributions.beta_rows, problem.prior.beta_rows)
    ) + error_weight * sum(
        kl_divergence(p, q) for p, q in zip(distributions.error_rows, problem.prior.error_rows)
    )
    residual = float(np.max(np.abs(pt.grad)))
    lam = np.array(lam, dtype=float)
    lam.setflags(write=False)
    return GceSolution(
        distributions=distributions,
        multipliers=lam,
        beta_hat=pt.beta_hat.copy(),
        epsilon_hat=pt.eps_hat.copy(),
        objective_value=float(objective),
        diagnostics=SolverDiagnostics(
            iterations=iterations,
            max_residual=residual,
            converged=residual <= settings.constraint_tolerance,
        ),
    )
