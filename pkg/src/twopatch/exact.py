"""Exact kernel over the full state space: transition matrix, hitting times.

States (j1, j2) are enumerated row-major as j1*(n2+1) + j2, so index 0 is the
absorbing state (0, 0) and the last index is the absorbing state (n1, n2).
Expected absorption times solve the linear system n1*(I - P_restricted)*T = 1
over the transient states; division by n1 converts step counts to time units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import Field, ModelParams, binomial_pmf_matrix, build_exchange_matrix

__all__ = [
    "STATE_CAP_DEFAULT",
    "StateSpaceError",
    "LinearSolveError",
    "TransitionMatrix",
    "HittingTimeTable",
    "state_index",
    "build_transition_matrix",
    "conditional_means",
    "square_displacement",
    "solve_hitting_times",
    "iterate_semigroup",
]

STATE_CAP_DEFAULT = 20_000

ROW_SUM_TOL = 1e-12


class StateSpaceError(ValueError):
    """The dense state space would exceed the configured cap."""


class LinearSolveError(RuntimeError):
    """A linear solve failed to reach the contracted residual."""


def state_index(j1: int, j2: int, n2: int) -> int:
    return j1 * (n2 + 1) + j2


def _grid_counts(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    j1, j2 = np.meshgrid(
        np.arange(params.n1 + 1), np.arange(params.n2 + 1), indexing="ij"
    )
    return j1.ravel(), j2.ravel()


@dataclass(frozen=True)
class TransitionMatrix:
    """Dense one-step kernel of the split-step chain."""

    params: ModelParams
    matrix: np.ndarray
    max_row_sum_deviation: float
    renormalized_rows: int

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def stats(self) -> dict:
        """Diagnostics suitable for a JSON report."""
        return {
            "n_states": int(self.n_states),
            "min_entry": float(self.matrix.min()),
            "max_row_sum_deviation": float(self.max_row_sum_deviation),
            "renormalized_rows": int(self.renormalized_rows),
        }


def build_transition_matrix(
    params: ModelParams, cap: int = STATE_CAP_DEFAULT
) -> TransitionMatrix:
    """Exact dense kernel: each row is a product of two binomial pmfs.

    The binomial parameters are the exchanged densities A*(j1/n1, j2/n2);
    pmfs are evaluated in log space.  Rows are renormalized only when the sum
    deviates from 1 by more than 1e-12 and the deviation is recorded.
    """
    n_states = params.n_states
    if n_states > cap:
        raise StateSpaceError(
            f"state space has {n_states} states, above the cap of {cap}; "
            "raise the cap explicitly to build this matrix"
        )
    n1, n2 = params.n1, params.n2
    exchange = build_exchange_matrix(params)
    j1, j2 = _grid_counts(params)
    p1, p2 = exchange.apply(j1 / n1, j2 / n2)
    p1 = np.clip(p1, 0.0, 1.0)
    p2 = np.clip(p2, 0.0, 1.0)
    # Pin the absorbing rows to exact point masses (guards 1-ulp rounding).
    top = state_index(n1, n2, n2)
    p1[0], p2[0] = 0.0, 0.0
    p1[top], p2[top] = 1.0, 1.0
    w1 = binomial_pmf_matrix(n1, p1)
    w2 = binomial_pmf_matrix(n2, p2)
    matrix = np.einsum("si,sk->sik", w1, w2).reshape(n_states, n_states)
    sums = matrix.sum(axis=1)
    deviation = np.abs(sums - 1.0)
    bad = deviation > ROW_SUM_TOL
    if np.any(bad):
        matrix[bad] /= sums[bad, None]
    return TransitionMatrix(
        params=params,
        matrix=matrix,
        max_row_sum_deviation=float(deviation.max()),
        renormalized_rows=int(bad.sum()),
    )


def conditional_means(tm: TransitionMatrix) -> np.ndarray:
    """One-step conditional mean density per state, shape (n_states, 2).

    Equals A*x exactly: the resampling is unbiased around the exchanged
    density.
    """
    params = tm.params
    j1, j2 = _grid_counts(params)
    y1 = j1 / params.n1
    y2 = j2 / params.n2
    return np.column_stack((tm.matrix @ y1, tm.matrix @ y2))


def square_displacement(tm: TransitionMatrix) -> np.ndarray:
    """E(|x' - x|^2 | x) per state, computed from the exact kernel.

    Scaled by n1 this is uniformly bounded: the drift contributes O(n1^-2)
    and each patch variance at most 1/(4 n_i).
    """
    params = tm.params
    j1, j2 = _grid_counts(params)
    y1 = j1 / params.n1
    y2 = j2 / params.n2
    sq = y1**2 + y2**2
    e_sq = tm.matrix @ sq
    e_y1 = tm.matrix @ y1
    e_y2 = tm.matrix @ y2
    return e_sq - 2.0 * (y1 * e_y1 + y2 * e_y2) + sq


@dataclass(frozen=True)
class HittingTimeTable:
    """Expected time to absorption from every state, in time units."""

    params: ModelParams
    field: Field
    residual: float

    def value(self, j1: int, j2: int) -> float:
        return float(self.field.values[j1, j2])


def solve_hitting_times(
    params: ModelParams,
    cap: int = STATE_CAP_DEFAULT,
    tm: TransitionMatrix | None = None,
) -> HittingTimeTable:
    """Solve n1*(I - P_restricted)*T = 1 for the expected absorption times.

    Direct LU factorization with iterative refinement; the residual of the
    scaled system must come out below 1e-10 in the sup norm.  kappa = 0 is
    rejected: without exchange a mixed state (one patch fixed at each
    species) never reaches (0,0) or (n1,n2), so the system is singular.
    """
    if params.kappa == 0.0:
        raise ValueError(
            "kappa = 0 admits no absorption path from mixed states "
            "(patches would have to fix on the same species without exchange); "
            "hitting times are undefined"
        )
    if tm is None:
        tm = build_transition_matrix(params, cap=cap)
    n_states = tm.n_states
    absorbing = [0, state_index(params.n1, params.n2, params.n2)]
    keep = np.setdiff1d(np.arange(n_states), absorbing)
    restricted = tm.matrix[np.ix_(keep, keep)]
    system = np.eye(keep.size) - restricted
    rhs = np.full(keep.size, params.dt)
    try:
        lu, piv = lu_factor(system)
    except Exception as exc:  # pragma: no cover - singular only when kappa=0
        raise LinearSolveError(f"hitting-time system factorization failed: {exc}")
    times = lu_solve((lu, piv), rhs)
    residual = params.n1 * np.abs(system @ times - rhs).max()
    for _ in range(2):
        if residual <= 1e-10:
            break
        times = times + lu_solve((lu, piv), rhs - system @ times)
        residual = params.n1 * np.abs(system @ times - rhs).max()
    if residual > 1e-10:
        raise LinearSolveError(
            f"hitting-time solve stalled at residual {residual:.3e} (> 1e-10)"
        )
    values = np.zeros(n_states)
    values[keep] = times
    field = Field(values.reshape(params.n1 + 1, params.n2 + 1))
    return HittingTimeTable(params=params, field=field, residual=float(residual))


def iterate_semigroup(
    f: Field,
    n: int,
    params: ModelParams,
    tm: TransitionMatrix | None = None,
    cap: int = STATE_CAP_DEFAULT,
) -> Field:
    """n-fold application of the exact kernel to a grid function.

    The kernel is an average, so the sup norm never increases and
    nonnegative functions stay nonnegative.
    """
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    expected = (params.n1 + 1, params.n2 + 1)
    if f.values.shape != expected:
        raise ValueError(f"field shape {f.values.shape} does not match grid {expected}")
    if n == 0:
        return f
    if tm is None:
        tm = build_transition_matrix(params, cap=cap)
    u = f.values.ravel()
    for _ in range(n):
        u = tm.matrix @ u
    return Field(u.reshape(expected))
