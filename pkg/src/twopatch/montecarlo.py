"""Monte Carlo estimation of extinction times and increment moments.

Replicate r draws from an independent stream derived from (seed, r) via
numpy's SeedSequence spawn-key construction, so results do not depend on
execution order.  Trajectories that hit the step cap are reported as
censored, never silently extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .model import GridState, ModelParams, _step_counts, build_exchange_matrix

__all__ = [
    "McConfig",
    "McResult",
    "MomentRow",
    "replicate_rng",
    "default_max_steps",
    "simulate_trajectory",
    "estimate_extinction_time",
    "result_rows",
    "moment_check",
]


def default_max_steps(params: ModelParams) -> int:
    """Censoring horizon: 200*n1 steps, comfortably past typical absorption
    for kappa around 1 and above."""
    return 200 * params.n1


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate, keyed by (seed, replicate)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


@dataclass(frozen=True)
class McConfig:
    """Replication plan for an extinction-time estimate."""

    replicates: int
    seed: int
    max_steps: int | None = None
    start: GridState | None = None

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class McResult:
    """Extinction-time estimate with censoring accounting.

    When ``censored_fraction > 0`` the mean is a lower bound: censored
    replicates enter at the horizon time.  ``steps`` and ``censored`` hold
    the per-replicate raw outcomes in replicate order.
    """

    mean_time: float
    stderr: float
    censored_fraction: float
    steps: np.ndarray
    censored: np.ndarray
    dt: float

    @property
    def raw_times(self) -> np.ndarray:
        """Per-replicate absorption (or censoring) times in time units."""
        return self.steps * self.dt

    @property
    def is_lower_bound(self) -> bool:
        return self.censored_fraction > 0.0


def simulate_trajectory(
    params: ModelParams,
    start: GridState,
    rng: np.random.Generator,
    max_steps: int,
) -> tuple[int, bool, GridState]:
    """Run the chain until absorption or the step cap.

    Returns (steps_taken, absorbed, terminal_state); time elapsed is
    steps_taken * params.dt.  Hitting the cap is a normal, explicit outcome.
    """
    start.validate(params)
    exchange = build_exchange_matrix(params)
    n1, n2 = params.n1, params.n2
    j1, j2 = start.j1, start.j2
    for steps in range(max_steps + 1):
        if (j1 == 0 and j2 == 0) or (j1 == n1 and j2 == n2):
            return steps, True, GridState(j1, j2)
        if steps == max_steps:
            break
        j1, j2 = _step_counts(j1, j2, exchange, n1, n2, rng)
    return max_steps, False, GridState(j1, j2)


def estimate_extinction_time(
    params: ModelParams,
    start: GridState | None,
    cfg: McConfig,
) -> McResult:
    """Mean and standard error of the absorption time over replicates.

    Deterministic given (seed, replicates, max_steps): replicate r uses the
    stream derived from (seed, r) regardless of execution order.  Censoring
    is flagged through the result, never an error.
    """
    if start is None:
        start = cfg.start
    if start is None:
        raise ValueError("a start state is required (argument or cfg.start)")
    max_steps = cfg.max_steps if cfg.max_steps is not None else default_max_steps(params)
    steps = np.zeros(cfg.replicates, dtype=np.int64)
    censored = np.zeros(cfg.replicates, dtype=bool)
    for r in range(cfg.replicates):
        rng = replicate_rng(cfg.seed, r)
        n_steps, absorbed, _ = simulate_trajectory(params, start, rng, max_steps)
        steps[r] = n_steps
        censored[r] = not absorbed
    times = steps * params.dt
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / np.sqrt(cfg.replicates)) if cfg.replicates > 1 else 0.0
    return McResult(
        mean_time=mean,
        stderr=stderr,
        censored_fraction=float(censored.mean()),
        steps=steps,
        censored=censored,
        dt=params.dt,
    )


def result_rows(result: McResult) -> Iterator[tuple[int, int, int]]:
    """Raw CSV rows: (replicate_index, steps, censored_flag)."""
    for r, (n_steps, flag) in enumerate(zip(result.steps, result.censored)):
        yield r, int(n_steps), int(flag)


@dataclass(frozen=True)
class MomentRow:
    """Increment moments at one lag, with their scale-free ratios.

    ``p2`` and ``p4`` are the worst (over the starting step m) replicate
    means of |x^(m+lag) - x^m|^2 and ^4.  The ratios p2*n1/lag and
    p4*n1^2/lag^2 stay bounded uniformly in n1 and lag.
    """

    lag: int
    p2: float
    p4: float
    p2_scaled: float
    p4_scaled: float


def _evolve_densities(
    params: ModelParams,
    start: GridState,
    horizon: int,
    replicates: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized trajectories; returns densities of shape (horizon+1, R, 2)."""
    exchange = build_exchange_matrix(params)
    n1, n2 = params.n1, params.n2
    j1 = np.full(replicates, start.j1, dtype=np.int64)
    j2 = np.full(replicates, start.j2, dtype=np.int64)
    out = np.empty((horizon + 1, replicates, 2))
    out[0, :, 0] = j1 / n1
    out[0, :, 1] = j2 / n2
    for m in range(1, horizon + 1):
        live = ~(((j1 == 0) & (j2 == 0)) | ((j1 == n1) & (j2 == n2)))
        p1, p2 = exchange.apply(j1 / n1, j2 / n2)
        p1 = np.clip(p1, 0.0, 1.0)
        p2 = np.clip(p2, 0.0, 1.0)
        j1 = np.where(live, rng.binomial(n1, p1), j1)
        j2 = np.where(live, rng.binomial(n2, p2), j2)
        out[m, :, 0] = j1 / n1
        out[m, :, 1] = j2 / n2
    return out


def moment_check(
    params: ModelParams,
    start: GridState,
    horizon: int,
    replicates: int,
    seed: int = 0,
    lags: Sequence[int] | None = None,
) -> list[MomentRow]:
    """Empirical second and fourth moments of trajectory increments.

    For each lag the estimate is maximized over the starting step m, the
    literal form of the "for any m < n" statements being checked.
    """
    start.validate(params)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if lags is None:
        lags = range(0, horizon + 1)
    lags = sorted(set(int(l) for l in lags))
    if lags and (lags[0] < 0 or lags[-1] > horizon):
        raise ValueError("lags must lie within [0, horizon]")
    traj = _evolve_densities(params, start, horizon, replicates, np.random.default_rng(seed))
    rows = []
    for lag in lags:
        if lag == 0:
            rows.append(MomentRow(0, 0.0, 0.0, 0.0, 0.0))
            continue
        diff_sq = ((traj[lag:] - traj[:-lag]) ** 2).sum(axis=2)
        p2 = float(diff_sq.mean(axis=1).max())
        p4 = float((diff_sq**2).mean(axis=1).max())
        rows.append(
            MomentRow(
                lag=lag,
                p2=p2,
                p4=p4,
                p2_scaled=p2 * params.n1 / lag,
                p4_scaled=p4 * params.n1**2 / lag**2,
            )
        )
    return rows
