"""Two-patch neutral metacommunity model.

One chain step advances time by ``dt = 1/n1`` and consists of a deterministic
exchange of individuals between the patches (a row-stochastic 2x2 map acting
on densities) followed by independent Wright-Fisher binomial resampling within
each patch.  The module also carries the closed-form functions used to bound
the expected extinction time: the entropy of a single merged patch, the
small-exchange barrier and the small-distortion sandwich width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "ModelParams",
    "GridState",
    "ExchangeMatrix",
    "Field",
    "AnalyticBounds",
    "build_exchange_matrix",
    "apply_exchange",
    "binomial_pmf",
    "binomial_pmf_matrix",
    "wf_sample",
    "step",
    "generator_apply",
    "bernstein_moments",
    "entropy_H",
    "tau_lower",
    "analytic_bounds",
    "generator_test_functions",
]


@dataclass(frozen=True)
class ModelParams:
    """Patch capacities and exchange speed.

    ``n1`` and ``n2`` are the numbers of individuals the two patches host
    (``n2 <= n1`` by convention; relabel the patches otherwise).  ``kappa``
    is the instantaneous exchange speed.  Derived quantities: the distortion
    ``d = n2/n1`` and the step length ``dt = 1/n1``; ``kappa * dt <= 1`` is
    required so the exchange map keeps densities inside [0, 1]^2.
    """

    n1: int
    n2: int
    kappa: float

    def __post_init__(self) -> None:
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise ValueError("patch capacities must be integers")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("patch capacities must be >= 1")
        if self.n2 > self.n1:
            raise ValueError(
                f"n2={self.n2} > n1={self.n1}: relabel the patches so n2 <= n1"
            )
        if not self.kappa >= 0.0:
            raise ValueError("kappa must be a nonnegative real")
        if self.kappa * self.dt > 1.0:
            raise ValueError(
                f"kappa*dt = {self.kappa * self.dt:g} > 1: exchange matrix would "
                "have entries outside [0, 1]"
            )

    @property
    def d(self) -> float:
        """Capacity ratio n2/n1, in (0, 1]."""
        return self.n2 / self.n1

    @property
    def dt(self) -> float:
        """Time advanced by one chain step."""
        return 1.0 / self.n1

    @property
    def n_states(self) -> int:
        """Size of the chain state space, (n1+1)*(n2+1)."""
        return (self.n1 + 1) * (self.n2 + 1)


@dataclass(frozen=True)
class GridState:
    """Abundances (j1, j2) of the tracked species in patch 1 and patch 2."""

    j1: int
    j2: int

    def validate(self, params: ModelParams) -> None:
        if not (0 <= self.j1 <= params.n1 and 0 <= self.j2 <= params.n2):
            raise ValueError(
                f"state ({self.j1}, {self.j2}) outside grid "
                f"[0, {params.n1}] x [0, {params.n2}]"
            )

    def density(self, params: ModelParams) -> tuple[float, float]:
        return self.j1 / params.n1, self.j2 / params.n2

    def is_absorbing(self, params: ModelParams) -> bool:
        """True at (0, 0) and (n1, n2): one species occupies both patches."""
        return (self.j1 == 0 and self.j2 == 0) or (
            self.j1 == params.n1 and self.j2 == params.n2
        )


@dataclass(frozen=True)
class ExchangeMatrix:
    """Row-stochastic 2x2 matrix acting on the density pair per step."""

    a11: float
    a12: float
    a21: float
    a22: float

    def apply(self, x1, x2):
        """Matrix-vector product; accepts scalars or arrays.

        Written in flux form (rows sum to 1, so Ax = x - (x1-x2)*(a12, -a21))
        to make every point of the diagonal x1 = x2 -- in particular the two
        absorbing corners -- an exact fixed point in floating point.
        """
        flux = x1 - x2
        return x1 - self.a12 * flux, x2 + self.a21 * flux

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=float)


@dataclass(frozen=True)
class Field:
    """Function sampled on a uniform grid over [0,1]^2.

    ``values[i, k]`` is the value at node ``(i/n1, k/n2)`` where the
    resolutions are implied by the array shape ``(n1+1, n2+1)``.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("field values must be a 2-D array, >= 2 nodes per axis")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite at every node")
        object.__setattr__(self, "values", v)

    @property
    def n1(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n2(self) -> int:
        return self.values.shape[1] - 1

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (ij-indexed) of node coordinates."""
        x1 = np.arange(self.n1 + 1) / self.n1
        x2 = np.arange(self.n2 + 1) / self.n2
        return np.meshgrid(x1, x2, indexing="ij")

    @classmethod
    def from_function(cls, n1: int, n2: int, func: Callable) -> "Field":
        x1 = np.arange(n1 + 1) / n1
        x2 = np.arange(n2 + 1) / n2
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return cls(np.asarray(func(X1, X2), dtype=float))


def build_exchange_matrix(params: ModelParams) -> ExchangeMatrix:
    """Exchange map A = [[1-k*d*dt, k*d*dt], [k*dt, 1-k*dt]].

    Rows sum to one; the map fixes (0,0) and (1,1) and conserves the total
    abundance functional x1 + d*x2.
    """
    kdt = params.kappa * params.dt
    return ExchangeMatrix(
        a11=1.0 - kdt * params.d,
        a12=kdt * params.d,
        a21=kdt,
        a22=1.0 - kdt,
    )


def apply_exchange(x: tuple[float, float], exchange: ExchangeMatrix) -> tuple[float, float]:
    """One deterministic exchange step on a density pair in [0,1]^2."""
    x1, x2 = x
    if not (0.0 <= x1 <= 1.0 and 0.0 <= x2 <= 1.0):
        raise ValueError(f"density pair {x!r} outside [0,1]^2")
    y1, y2 = exchange.apply(x1, x2)
    # The convex combination can stray from [0,1] by an ulp; pin it back.
    return min(max(y1, 0.0), 1.0), min(max(y2, 0.0), 1.0)


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Exact pmf of Binomial(n, p) on {0, ..., n}, evaluated in log space."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binomial parameter p={p!r} outside [0, 1]")
    out = np.zeros(n + 1)
    if p == 0.0:
        out[0] = 1.0
    elif p == 1.0:
        out[n] = 1.0
    else:
        j = np.arange(n + 1)
        logc = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
        out = np.exp(logc + j * math.log(p) + (n - j) * math.log1p(-p))
    return out


def binomial_pmf_matrix(n: int, p: np.ndarray) -> np.ndarray:
    """Rows of binomial pmfs: ``out[s] = pmf of Binomial(n, p[s])``.

    Degenerate parameters p=0 and p=1 produce exact point masses.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("p must be a 1-D array of parameters")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("binomial parameters must lie in [0, 1]")
    j = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
    out = np.zeros((p.size, n + 1))
    interior = (p > 0.0) & (p < 1.0)
    if np.any(interior):
        pi = p[interior][:, None]
        out[interior] = np.exp(logc + j * np.log(pi) + (n - j) * np.log1p(-pi))
    out[p == 0.0, 0] = 1.0
    out[p == 1.0, n] = 1.0
    return out


def wf_sample(p: float, n: int, rng: np.random.Generator) -> int:
    """One Wright-Fisher resampling draw: Binomial(n, p), exact distribution.

    numpy's generator draws by inversion for small n*p and by an exact
    rejection method otherwise, so no normal approximation is involved.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binomial parameter p={p!r} outside [0, 1]")
    if n < 1:
        raise ValueError("n must be a positive integer")
    return int(rng.binomial(n, p))


def _step_counts(
    j1: int,
    j2: int,
    exchange: ExchangeMatrix,
    n1: int,
    n2: int,
    rng: np.random.Generator,
) -> tuple[int, int]:
    # Absorbing states are exact fixed points; skip the draws entirely.
    if (j1 == 0 and j2 == 0) or (j1 == n1 and j2 == n2):
        return j1, j2
    p1, p2 = exchange.apply(j1 / n1, j2 / n2)
    # Guard against 1-ulp excursions outside [0, 1] from the matrix product.
    p1 = min(max(p1, 0.0), 1.0)
    p2 = min(max(p2, 0.0), 1.0)
    return int(rng.binomial(n1, p1)), int(rng.binomial(n2, p2))


def step(
    s: GridState,
    params: ModelParams,
    rng: np.random.Generator,
    exchange: ExchangeMatrix | None = None,
) -> GridState:
    """One split-step transition: exchange first, then independent resampling.

    The exchanged density pair ``p = A x`` is used only as the binomial
    parameter, so the chain never leaves the integer grid.
    """
    s.validate(params)
    if exchange is None:
        exchange = build_exchange_matrix(params)
    j1, j2 = _step_counts(s.j1, s.j2, exchange, params.n1, params.n2, rng)
    return GridState(j1, j2)


def generator_apply(f: Callable, params: ModelParams) -> Field:
    """Discrete generator n1*(E[f(x')|x] - f(x)) evaluated exactly on the grid.

    The expectation is taken under the full binomial-product kernel with
    parameter Ax (no sampling).  ``f`` must accept the meshgrid arrays of
    node coordinates.  For the conserved functional x1 + d*x2 the result is
    identically zero.
    """
    a = build_exchange_matrix(params)
    n1, n2 = params.n1, params.n2
    x1 = np.arange(n1 + 1) / n1
    x2 = np.arange(n2 + 1) / n2
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    fgrid = np.asarray(f(X1, X2), dtype=float)
    if fgrid.shape != X1.shape:
        raise ValueError("f must be defined (vectorized) on the full grid")
    p1, p2 = a.apply(X1.ravel(), X2.ravel())
    w1 = binomial_pmf_matrix(n1, np.clip(p1, 0.0, 1.0))
    w2 = binomial_pmf_matrix(n2, np.clip(p2, 0.0, 1.0))
    mean_next = np.einsum("sj,jk,sk->s", w1, fgrid, w2, optimize=True)
    values = n1 * (mean_next.reshape(X1.shape) - fgrid)
    return Field(values)


def bernstein_moments(n: int, x: float) -> tuple[float, float, float, float, float]:
    """First five moments of Binomial(n, x)/n, computed exactly from the pmf.

    m0 = 1, m1 = x, m2 = x^2 + x(1-x)/n; m3 and m4 follow the same pattern
    with O(n^-2) corrections, which makes the centered fourth moment O(n^-2).
    """
    w = binomial_pmf(n, x)
    t = np.arange(n + 1) / n
    return tuple(float(np.sum(w * t**k)) for k in range(5))


def entropy_H(x):
    """Expected fixation time of a single Wright-Fisher patch started at x.

    H(x) = -2(x ln x + (1-x) ln(1-x)) with 0 ln 0 = 0; solves
    -(x(1-x)/2) H'' = 1 on (0,1) and vanishes at both ends.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("entropy argument outside [0, 1]")
    out = -2.0 * (xlogy(arr, arr) + xlogy(1.0 - arr, 1.0 - arr))
    return out if isinstance(x, np.ndarray) else float(out)


def tau_lower(x1, x2, d: float):
    """Extinction time of the merged single patch, (1+d) H(z).

    z = (x1 + d*x2)/(1+d) is the averaged starting density.  This lower
    bounds the two-patch extinction time and vanishes at (0,0) and (1,1).
    """
    if not 0.0 < d <= 1.0:
        raise ValueError("distortion d must lie in (0, 1]")
    z = (np.asarray(x1, dtype=float) + d * np.asarray(x2, dtype=float)) / (1.0 + d)
    # z can stray one ulp outside [0,1] when x1 = x2 = 1.
    z = np.clip(z, 0.0, 1.0)
    out = (1.0 + d) * entropy_H(z)
    return out if (np.ndim(x1) or np.ndim(x2)) else float(out)


@dataclass(frozen=True)
class AnalyticBounds:
    """Closed-form comparison quantities evaluated at density pairs.

    ``kappa_barrier``: subsolution (x1(1-x2)+x2(1-x1))/(12 kappa); stays below
    the extinction time at every point, so the extinction time diverges as
    kappa -> 0 away from the corners.
    ``sandwich_width``: 2d(H(x2) + x1 x2^d + (1-x1)(1-x2)^d); for small d
    bounds the excess of the extinction time over ``tau_lower``.
    ``residual_identity``: the algebraic identity linking the two, zero
    wherever z(1-z) > 0 and NaN on the degenerate set z in {0, 1}.
    """

    kappa_barrier: np.ndarray
    sandwich_width: np.ndarray
    residual_identity: np.ndarray


def analytic_bounds(x1, x2, d: float, kappa: float) -> AnalyticBounds:
    """Evaluate the closed-form bound functions at density pairs."""
    if not 0.0 < d <= 1.0:
        raise ValueError("distortion d must lie in (0, 1]")
    if not kappa > 0.0:
        raise ValueError("kappa must be positive for the barrier")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    barrier = (x1 * (1.0 - x2) + x2 * (1.0 - x1)) / (12.0 * kappa)
    width = 2.0 * d * (entropy_H(x2) + x1 * x2**d + (1.0 - x1) * (1.0 - x2) ** d)
    z = np.clip((x1 + d * x2) / (1.0 + d), 0.0, 1.0)
    zz = z * (1.0 - z)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = (x1 * (1.0 - x1) + d * x2 * (1.0 - x2)) / ((1.0 + d) * zz)
        rhs = 1.0 - d * (x1 - x2) ** 2 / ((1.0 + d) ** 2 * zz)
        residual = np.where(zz > 0.0, lhs - rhs, np.nan)
    return AnalyticBounds(barrier, width, residual)


def generator_test_functions(d: float, kappa: float) -> list[tuple[str, Callable, Callable]]:
    """Seven polynomial test functions paired with their limit-generator images.

    Each entry is (name, f, Lf) with both callables vectorized over meshgrid
    coordinate arrays.  The generator image of x1 + d*x2 vanishes identically
    (exchange conserves it and resampling is unbiased).
    """
    return [
        ("one", lambda x1, x2: 1.0 + 0.0 * x1, lambda x1, x2: 0.0 * x1),
        ("x1", lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: -kappa * d * (x1 - x2)),
        ("x2", lambda x1, x2: x2 + 0.0 * x1, lambda x1, x2: kappa * (x1 - x2)),
        (
            "x1+d*x2",
            lambda x1, x2: x1 + d * x2,
            lambda x1, x2: 0.0 * x1,
        ),
        (
            "x1^2",
            lambda x1, x2: x1**2 + 0.0 * x2,
            lambda x1, x2: x1 * (1.0 - x1) - 2.0 * kappa * d * (x1 - x2) * x1,
        ),
        (
            "x2^2",
            lambda x1, x2: x2**2 + 0.0 * x1,
            lambda x1, x2: x2 * (1.0 - x2) / d + 2.0 * kappa * (x1 - x2) * x2,
        ),
        (
            "x1*x2",
            lambda x1, x2: x1 * x2,
            lambda x1, x2: kappa * (x1 - x2) * (x1 - d * x2),
        ),
    ]
