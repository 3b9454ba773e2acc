"""Finite-difference solvers for the limiting diffusion of the two-patch chain.

The limit operator on [0,1]^2 is

    L u = x1(1-x1)/2 * u_11 + x2(1-x2)/(2d) * u_22 + v . grad u,

with drift velocity v = (-kappa*d*(x1-x2), kappa*(x1-x2)).  Both diffusion
coefficients vanish on their respective edges, and the drift points into the
square everywhere on the boundary, so the only nodes carrying data are the
two corners (0,0) and (1,1) -- exactly the absorbing states of the chain.

Diffusion is discretized with central second differences, drift with
first-order upwind differences chosen per node and per axis.  That makes the
assembled matrix of -L (with identity rows at the two corners) an M-matrix,
which is the discrete form of the comparison principle: the elliptic solve
-L tau = 1 returns positive times, and implicit-Euler parabolic steps
preserve nonnegativity and never increase the sup norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .model import Field

__all__ = [
    "PdeGrid",
    "DiscreteOperator",
    "ParabolicResult",
    "MMatrixError",
    "EllipticSolveError",
    "discretize_Ld",
    "solve_elliptic",
    "elliptic_residual",
    "solve_parabolic",
    "solve_single_patch",
]


class MMatrixError(RuntimeError):
    """The assembled system matrix violates the M-matrix certificate."""


class EllipticSolveError(RuntimeError):
    """The elliptic solve failed or missed the residual contract."""


@dataclass(frozen=True)
class PdeGrid:
    """Uniform (n+1) x (n+1) node grid on [0,1]^2 with spacing h = 1/n."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 4:
            raise ValueError("grid resolution n must be >= 4")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 2

    def index(self, i: int, k: int) -> int:
        return i * (self.n + 1) + k

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n + 1) / self.n
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse discretization of L with its M-matrix certificate.

    ``generator`` holds the rows of L (zero rows at the two Dirichlet
    corners); ``system`` is -L with identity rows there, the matrix actually
    certified and solved against.
    """

    grid: PdeGrid
    d: float
    kappa: float
    generator: sparse.csr_matrix = field(repr=False)
    system: sparse.csr_matrix = field(repr=False)
    certificate: dict = field(default_factory=dict)

    @property
    def dirichlet_indices(self) -> tuple[int, int]:
        return 0, self.grid.n_nodes - 1

    def apply(self, values: np.ndarray) -> np.ndarray:
        """L applied to a grid function (rows at the corners are zero)."""
        flat = np.asarray(values, dtype=float).ravel()
        if flat.size != self.grid.n_nodes:
            raise ValueError("field size does not match the grid")
        return (self.generator @ flat).reshape((self.grid.n + 1, self.grid.n + 1))


def _certify(system: sparse.csr_matrix, grid: PdeGrid, kappa: float) -> dict:
    """M-matrix certificate: sign pattern plus weak row diagonal dominance.

    Row sums of -L are zero in exact arithmetic; they are accepted here up to
    a few ulps of the absolute row sums.  Identically-zero rows can occur
    only at the two free corners when kappa = 0, where the generator
    genuinely degenerates to zero; such rows are singular-M-matrix rows and
    are counted in the certificate.
    """
    n = grid.n
    csr = system.tocsr()
    diag = csr.diagonal()
    offdiag = csr.copy()
    offdiag.setdiag(0.0)
    offdiag.eliminate_zeros()
    max_offdiag = float(offdiag.data.max()) if offdiag.nnz else 0.0
    if max_offdiag > 1e-14:
        raise MMatrixError(f"positive off-diagonal entry {max_offdiag:.3e}")
    if np.any(diag < 0.0):
        raise MMatrixError("negative diagonal entry in the system matrix")
    ones = np.ones(grid.n_nodes)
    row_sums = csr @ ones
    abs_sums = abs(csr) @ ones
    slack = 32.0 * np.finfo(float).eps * np.maximum(abs_sums, 1.0)
    worst = float((row_sums + slack).min())
    if worst < 0.0:
        raise MMatrixError(f"row sum {row_sums.min():.3e} breaks weak dominance")
    zero_rows = np.flatnonzero(abs_sums == 0.0)
    allowed = {grid.index(0, n), grid.index(n, 0)}
    if zero_rows.size and (kappa != 0.0 or not set(zero_rows.tolist()) <= allowed):
        raise MMatrixError(f"unexpected zero rows at indices {zero_rows.tolist()}")
    nonzero = abs_sums > 0.0
    if np.any(diag[nonzero] <= 0.0):
        raise MMatrixError("zero diagonal on a row that carries an equation")
    return {
        "is_m_matrix": True,
        "n_nodes": int(grid.n_nodes),
        "max_offdiagonal": max_offdiag,
        "min_diagonal": float(diag[nonzero].min()),
        "max_diagonal": float(diag.max()),
        "min_row_sum": float(row_sums.min()),
        "max_row_sum": float(row_sums.max()),
        "degenerate_zero_rows": int(zero_rows.size),
    }


def discretize_Ld(grid: PdeGrid, d: float, kappa: float) -> DiscreteOperator:
    """Assemble L on the grid: central diffusion, per-node upwind drift.

    On edges the normal diffusion coefficient vanishes, so no stencil ever
    reaches outside the grid; the drift velocity points inward on every edge,
    which the assembly asserts.  Construction fails loudly if the resulting
    system matrix is not an M-matrix.
    """
    if not 0.0 < d <= 1.0:
        raise ValueError("distortion d must lie in (0, 1]")
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    n = grid.n
    h = grid.h
    m = n + 1
    i_idx, k_idx = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    i_idx = i_idx.ravel()
    k_idx = k_idx.ravel()
    x1 = i_idx / n
    x2 = k_idx / n
    s = i_idx * m + k_idx
    dirichlet = ((i_idx == 0) & (k_idx == 0)) | ((i_idx == n) & (k_idx == n))
    free = ~dirichlet

    c1 = x1 * (1.0 - x1) / 2.0 / h**2
    c2 = x2 * (1.0 - x2) / (2.0 * d) / h**2
    v1 = -kappa * d * (x1 - x2)
    v2 = kappa * (x1 - x2)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def put(r: np.ndarray, c: np.ndarray, v: np.ndarray) -> None:
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # Central second differences; the coefficient vanishing on an edge means
    # the neighbors there are never referenced.
    m1 = free & (c1 > 0.0)
    put(s[m1], s[m1] - m, c1[m1])
    put(s[m1], s[m1] + m, c1[m1])
    put(s[m1], s[m1], -2.0 * c1[m1])
    m2 = free & (c2 > 0.0)
    put(s[m2], s[m2] - 1, c2[m2])
    put(s[m2], s[m2] + 1, c2[m2])
    put(s[m2], s[m2], -2.0 * c2[m2])

    # First-order upwind drift: the donor node sits on the side the velocity
    # comes from, so the off-diagonal lands at the upwind neighbor.
    mv1 = free & (v1 != 0.0)
    up1 = np.where(v1 > 0.0, s + m, s - m)
    if np.any((up1[mv1] < 0) | (up1[mv1] >= m * m)):
        raise MMatrixError("drift stencil left the grid along x1")
    put(s[mv1], up1[mv1], np.abs(v1[mv1]) / h)
    put(s[mv1], s[mv1], -np.abs(v1[mv1]) / h)
    mv2 = free & (v2 != 0.0)
    up2 = np.where(v2 > 0.0, s + 1, s - 1)
    k_up = np.where(v2 > 0.0, k_idx + 1, k_idx - 1)
    if np.any((k_up[mv2] < 0) | (k_up[mv2] > n)):
        raise MMatrixError("drift stencil left the grid along x2")
    put(s[mv2], up2[mv2], np.abs(v2[mv2]) / h)
    put(s[mv2], s[mv2], -np.abs(v2[mv2]) / h)

    generator = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m * m, m * m),
    ).tocsr()

    system = (-generator).tolil()
    for idx in (0, m * m - 1):
        system.rows[idx] = [idx]
        system.data[idx] = [1.0]
    system = system.tocsr()
    certificate = _certify(system, grid, kappa)
    return DiscreteOperator(
        grid=grid,
        d=d,
        kappa=kappa,
        generator=generator,
        system=system,
        certificate=certificate,
    )


def _equilibrated(op: DiscreteOperator) -> tuple[sparse.csc_matrix, np.ndarray, np.ndarray]:
    """Row-equilibrated elliptic system: each equation divided by its diagonal.

    The raw rows of -L span several orders of magnitude (entries scale like
    1/(d h^2)), which puts an absolute residual tolerance below the floating
    point floor ||A|| ||tau|| eps on fine grids; the unit-diagonal form keeps
    residuals meaningful.  A zero diagonal means a free corner carries no
    equation, which happens exactly when kappa = 0 and the system is
    genuinely singular.
    """
    diag = op.system.diagonal()
    if np.any(diag == 0.0):
        raise EllipticSolveError(
            "elliptic system is singular: with kappa = 0 the free corners are "
            "disconnected from the data and the extinction time diverges"
        )
    rhs = np.ones(op.grid.n_nodes)
    rhs[[0, op.grid.n_nodes - 1]] = 0.0
    scaled = (sparse.diags(1.0 / diag) @ op.system).tocsc()
    return scaled, rhs / diag, diag


def solve_elliptic(op: DiscreteOperator, residual_tol: float = 1e-10) -> Field:
    """Solve -L tau = 1 with tau = 0 at the corners (0,0) and (1,1).

    Sparse LU of the diagonally-equilibrated system with iterative refinement
    until its sup-norm residual (the componentwise backward error of the raw
    equations, row-scaled by the diagonal) is below ``residual_tol``.  The
    M-matrix structure makes the solution nonnegative; a negative value
    therefore signals a broken solve and raises.
    """
    grid = op.grid
    system, rhs, _ = _equilibrated(op)
    try:
        lu = splu(system)
    except RuntimeError as exc:
        raise EllipticSolveError(f"elliptic factorization failed: {exc}")
    corners = [0, grid.n_nodes - 1]
    tau = lu.solve(rhs)
    tau[corners] = 0.0  # Dirichlet data, pinned against LU round-off
    residual = np.abs(system @ tau - rhs).max()
    for _ in range(3):
        if residual <= residual_tol:
            break
        tau = tau + lu.solve(rhs - system @ tau)
        tau[corners] = 0.0
        residual = np.abs(system @ tau - rhs).max()
    if not np.isfinite(residual) or residual > residual_tol:
        raise EllipticSolveError(
            f"elliptic solve stalled at residual {residual:.3e} (> {residual_tol:g})"
        )
    if tau.min() < -1e-12:
        raise EllipticSolveError(
            f"negative extinction time {tau.min():.3e}: comparison structure broken"
        )
    return Field(tau.reshape(grid.n + 1, grid.n + 1))


def elliptic_residual(op: DiscreteOperator, tau: Field) -> float:
    """Sup-norm residual of the equilibrated -L tau = 1 system, for reporting."""
    system, rhs, _ = _equilibrated(op)
    return float(np.abs(system @ tau.values.ravel() - rhs).max())


@dataclass(frozen=True)
class ParabolicResult:
    """Final state of an implicit-Euler run plus per-level diagnostics."""

    final: Field
    min_value: float
    supnorms: np.ndarray

    @property
    def sup_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.supnorms) <= 1e-10))


def solve_parabolic(
    op: DiscreteOperator, f: Field, horizon: float, nt: int
) -> ParabolicResult:
    """Implicit Euler for u_t = L u from initial data f (zero at the corners).

    Each step solves (I - dt*L) u_new = u_old; that matrix inherits the
    M-matrix property with row sums >= 1, so nonnegative data stays
    nonnegative and the sup norm cannot grow.
    """
    grid = op.grid
    if nt < 1:
        raise ValueError("nt must be >= 1")
    if horizon <= 0.0:
        raise ValueError("time horizon must be positive")
    if f.values.shape != (grid.n + 1, grid.n + 1):
        raise ValueError("initial field does not match the grid")
    corners = f.values[0, 0], f.values[-1, -1]
    if corners != (0.0, 0.0):
        raise ValueError(f"initial field must vanish at both corners, got {corners}")
    dt = horizon / nt
    # Corner rows of L are zero, so the identity already supplies the
    # Dirichlet rows of the stepping matrix.
    stepper = (sparse.identity(grid.n_nodes, format="csr") - dt * op.generator).tocsc()
    lu = splu(stepper)
    u = f.values.ravel().copy()
    supnorms = [float(np.abs(u).max())]
    min_value = float(u.min())
    for _ in range(nt):
        u = lu.solve(u)
        u[0] = u[-1] = 0.0  # corner data stays exactly zero
        supnorms.append(float(np.abs(u).max()))
        min_value = min(min_value, float(u.min()))
    return ParabolicResult(
        final=Field(u.reshape(grid.n + 1, grid.n + 1)),
        min_value=min_value,
        supnorms=np.asarray(supnorms),
    )


def solve_single_patch(d: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Hitting time of a single merged patch: -(z(1-z)/(2(1+d))) g'' = 1.

    Same monotone machinery in one dimension (central differences, Dirichlet
    ends); the closed form is (1+d) H(z), which refinement studies compare
    against.  Returns (nodes, values).
    """
    if not 0.0 < d <= 1.0:
        raise ValueError("distortion d must lie in (0, 1]")
    if n < 4:
        raise ValueError("grid resolution n must be >= 4")
    z = np.arange(n + 1) / n
    h = 1.0 / n
    a = z * (1.0 - z) / (2.0 * (1.0 + d)) / h**2
    # Banded form of the tridiagonal system a*(2g_i - g_{i-1} - g_{i+1}) = 1
    # with identity rows at both ends.
    ab = np.zeros((3, n + 1))
    ab[0, 2:] = -a[1:-1]
    ab[1, 1:-1] = 2.0 * a[1:-1]
    ab[1, 0] = ab[1, n] = 1.0
    ab[2, :-2] = -a[1:-1]
    rhs = np.ones(n + 1)
    rhs[0] = rhs[n] = 0.0
    g = solve_banded((1, 1), ab, rhs)
    return z, g
