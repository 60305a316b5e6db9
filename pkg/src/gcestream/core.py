"""Finite-support probability objects and the information functionals on them.

Everything downstream works with reparameterized regressions: each coefficient
and each noise term is written as the expectation of a discrete distribution
over a small, fixed support row. This module holds those building blocks:
support grids, simplex weight vectors, their joint container, and the three
functionals (expectation, Shannon entropy, KL divergence) the estimators
optimize.

Conventions shared by the whole package:

* weights are nonnegative and sum to one within ``SUM_TOLERANCE`` at
  construction, then are renormalized so the stored sum is exact;
* weights smaller than ``ZERO_CLAMP`` are treated as exact zeros inside
  logarithms, and the convention 0 * log(0) = 0 applies throughout;
* all containers are immutable values, safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SUM_TOLERANCE",
    "ZERO_CLAMP",
    "SimplexDistribution",
    "SupportGrid",
    "JointDistribution",
    "expectation",
    "shannon_entropy",
    "kl_divergence",
]

#: Tolerance on |sum(weights) - 1| accepted at construction time.
SUM_TOLERANCE = 1e-12

#: Weights below this value are clamped to exact zero before any logarithm.
ZERO_CLAMP = 1e-300


def _frozen_array(values, dtype=float) -> np.ndarray:
    """Copy ``values`` into a read-only float array."""
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimplexDistribution:
    """Nonnegative weights over one support row, summing to one.

    The constructor validates and then renormalizes, so ``weights.sum()`` is
    exact up to one rounding of the division. The stored array is read-only.
    """

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("weights must be a 1-D vector with at least two entries")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0.0):
            raise ValueError(f"weights must be nonnegative, got min {w.min()!r}")
        total = float(w.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"weights sum to {total!r}, expected 1 within {SUM_TOLERANCE}")
        w /= total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, size: int) -> "SimplexDistribution":
        if size < 2:
            raise ValueError("a support row needs at least two points")
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class SupportGrid:
    """Fixed support points for every coefficient row and every noise row.

    ``beta_support`` has one row per regression coefficient (shape ``(J, K)``)
    and ``error_support`` one row per observation (shape ``(m, H)``). Rows are
    strictly increasing; every error row must bracket zero so that noiseless
    observations stay representable.
    """

    beta_support: np.ndarray
    error_support: np.ndarray

    def __post_init__(self) -> None:
        beta = np.atleast_2d(np.array(self.beta_support, dtype=float))
        err = np.atleast_2d(np.array(self.error_support, dtype=float))
        for name, rows, min_cols in (("beta_support", beta, 2), ("error_support", err, 2)):
            if rows.ndim != 2 or rows.shape[1] < min_cols:
                raise ValueError(f"{name} must be 2-D with at least {min_cols} columns")
            if not np.all(np.isfinite(rows)):
                raise ValueError(f"{name} must be finite")
            if np.any(np.diff(rows, axis=1) <= 0.0):
                raise ValueError(f"{name} rows must be strictly increasing")
        if np.any(err[:, 0] >= 0.0) or np.any(err[:, -1] <= 0.0):
            raise ValueError("every error_support row must span zero (min < 0 < max)")
        beta.setflags(write=False)
        err.setflags(write=False)
        object.__setattr__(self, "beta_support", beta)
        object.__setattr__(self, "error_support", err)

    @classmethod
    def tiled(
        cls,
        beta_points: Sequence[float],
        n_params: int,
        error_points: Sequence[float],
        n_obs: int,
    ) -> "SupportGrid":
        """Repeat one coefficient row ``n_params`` times and one error row ``n_obs`` times."""
        beta_row = np.asarray(beta_points, dtype=float)
        error_row = np.asarray(error_points, dtype=float)
        return cls(np.tile(beta_row, (n_params, 1)), np.tile(error_row, (n_obs, 1)))

    @property
    def n_params(self) -> int:
        return int(self.beta_support.shape[0])

    @property
    def n_beta_points(self) -> int:
        return int(self.beta_support.shape[1])

    @property
    def n_obs(self) -> int:
        return int(self.error_support.shape[0])

    @property
    def n_error_points(self) -> int:
        return int(self.error_support.shape[1])


@dataclass(frozen=True)
class JointDistribution:
    """One simplex row per coefficient plus one per observation."""

    beta_rows: tuple[SimplexDistribution, ...]
    error_rows: tuple[SimplexDistribution, ...]

    def __post_init__(self) -> None:
        beta_rows = tuple(self.beta_rows)
        error_rows = tuple(self.error_rows)
        if not beta_rows or not error_rows:
            raise ValueError("need at least one coefficient row and one error row")
        for name, rows in (("beta_rows", beta_rows), ("error_rows", error_rows)):
            if not all(isinstance(r, SimplexDistribution) for r in rows):
                raise ValueError(f"{name} must contain SimplexDistribution values")
        object.__setattr__(self, "beta_rows", beta_rows)
        object.__setattr__(self, "error_rows", error_rows)

    @classmethod
    def uniform(cls, grid: SupportGrid) -> "JointDistribution":
        beta = tuple(SimplexDistribution.uniform(grid.n_beta_points) for _ in range(grid.n_params))
        err = tuple(SimplexDistribution.uniform(grid.n_error_points) for _ in range(grid.n_obs))
        return cls(beta, err)

    @classmethod
    def from_matrices(cls, beta: np.ndarray, error: np.ndarray) -> "JointDistribution":
        return cls(
            tuple(SimplexDistribution(row) for row in np.atleast_2d(beta)),
            tuple(SimplexDistribution(row) for row in np.atleast_2d(error)),
        )

    def beta_matrix(self) -> np.ndarray:
        return np.vstack([r.weights for r in self.beta_rows])

    def error_matrix(self) -> np.ndarray:
        return np.vstack([r.weights for r in self.error_rows])

    def matches_grid(self, grid: SupportGrid) -> bool:
        """True when row counts and row lengths line up with ``grid``."""
        return (
            len(self.beta_rows) == grid.n_params
            and len(self.error_rows) == grid.n_obs
            and all(len(r) == grid.n_beta_points for r in self.beta_rows)
            and all(len(r) == grid.n_error_points for r in self.error_rows)
        )


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------


def _clamped(weights: np.ndarray) -> np.ndarray:
    """Zero out weights below the logarithm clamp."""
    return np.where(weights < ZERO_CLAMP, 0.0, weights)


def expectation(dist: SimplexDistribution, support_row: Iterable[float]) -> float:
    """Weighted mean of ``support_row`` under ``dist``."""
    z = np.asarray(support_row, dtype=float)
    if z.ndim != 1 or z.size != len(dist):
        raise ValueError(f"support row has length {z.size}, distribution has {len(dist)}")
    return float(dist.weights @ z)


def shannon_entropy(dist: SimplexDistribution) -> float:
    """Shannon entropy in nats; zero weights contribute nothing."""
    w = _clamped(dist.weights)
    positive = w[w > 0.0]
    return float(-(positive * np.log(positive)).sum())


def kl_divergence(p: SimplexDistribution, q: SimplexDistribution) -> float:
    """KL divergence of ``p`` from ``q``; requires ``q`` to dominate ``p``.

    Raises ValueError when some ``p`` weight is positive where ``q`` vanishes
    (after clamping), since the divergence is infinite there.
    """
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    pw = _clamped(p.weights)
    qw = _clamped(q.weights)
    mask = pw > 0.0
    if np.any(qw[mask] == 0.0):
        raise ValueError("reference distribution must dominate: q vanishes where p > 0")
    value = float((pw[mask] * np.log(pw[mask] / qw[mask])).sum())
    # Exact zero for identical rows; tiny negative values are pure rounding.
    return max(value, 0.0)
