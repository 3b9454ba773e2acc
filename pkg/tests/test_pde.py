"""Unit tests for the monotone finite-difference scheme and its solvers."""

import numpy as np
import pytest

from twopatch import (
    EllipticSolveError,
    Field,
    ModelParams,
    PdeGrid,
    discretize_Ld,
    entropy_H,
    solve_elliptic,
    solve_hitting_times,
    solve_parabolic,
    solve_single_patch,
    tau_lower,
)
from twopatch.pde import elliptic_residual


# ---------------------------------------------------------------------------
# Grid and certificate


def test_grid_validation():
    g = PdeGrid(64)
    assert g.h == pytest.approx(1.0 / 64)
    assert g.n_nodes == 65 * 65
    with pytest.raises(ValueError):
        PdeGrid(3)


@pytest.mark.parametrize("d", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("kappa", [0.0, 0.5, 1.0, 4.0])
def test_certificate_holds_across_parameters(d, kappa):
    op = discretize_Ld(PdeGrid(48), d, kappa)
    cert = op.certificate
    assert cert["is_m_matrix"]
    assert cert["max_offdiagonal"] <= 1e-14
    assert cert["min_row_sum"] >= -1e-10
    # Zero rows appear only in the degenerate kappa = 0 case, at the two
    # free corners where the generator genuinely vanishes.
    assert cert["degenerate_zero_rows"] == (2 if kappa == 0.0 else 0)


def test_discretize_validates_inputs():
    with pytest.raises(ValueError):
        discretize_Ld(PdeGrid(16), 0.0, 1.0)
    with pytest.raises(ValueError):
        discretize_Ld(PdeGrid(16), 1.5, 1.0)
    with pytest.raises(ValueError):
        discretize_Ld(PdeGrid(16), 0.5, -1.0)


def test_operator_apply_matches_generator_on_conserved_function():
    op = discretize_Ld(PdeGrid(32), 0.5, 1.0)
    xs = np.arange(33) / 32
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    vals = X1 + 0.5 * X2
    img = op.apply(vals)
    # The drift conserves x1 + d*x2 and the function is linear, so the
    # discrete image vanishes identically on interior nodes.
    assert np.abs(img[1:-1, 1:-1]).max() <= 1e-10


# ---------------------------------------------------------------------------
# Elliptic solve


def test_elliptic_solution_properties():
    op = discretize_Ld(PdeGrid(64), 0.5, 1.0)
    tau = solve_elliptic(op)
    assert tau.values[0, 0] == 0.0
    assert tau.values[-1, -1] == 0.0
    off = tau.values.copy()
    off[0, 0] = off[-1, -1] = np.inf
    assert off.min() > 0.0
    assert elliptic_residual(op, tau) <= 1e-10


def test_elliptic_dominates_subsolution():
    grid = PdeGrid(96)
    op = discretize_Ld(grid, 0.5, 1.0)
    tau = solve_elliptic(op)
    x1, x2 = tau.nodes()
    assert (tau.values - tau_lower(x1, x2, 0.5)).min() >= -1e-9


def test_elliptic_rejects_kappa_zero_as_singular():
    op = discretize_Ld(PdeGrid(16), 0.5, 0.0)
    with pytest.raises(EllipticSolveError, match="singular"):
        solve_elliptic(op)


def test_elliptic_agrees_with_exact_chain():
    # Chain nodes are a subset of the PDE grid when n is a multiple of both
    # patch sizes; at N=8 the sup difference is a few percent.
    p = ModelParams(8, 8, 1.0)
    chain = solve_hitting_times(p).field.values
    tau = solve_elliptic(discretize_Ld(PdeGrid(128), 1.0, 1.0))
    sub = tau.values[::16, ::16]
    assert np.abs(sub - chain).max() <= 0.35


# ---------------------------------------------------------------------------
# Parabolic solve


def test_parabolic_positivity_and_contraction():
    op = discretize_Ld(PdeGrid(48), 0.5, 1.0)
    init = Field.from_function(48, 48, lambda x1, x2: x1 * (1 - x1) + x2 * (1 - x2))
    res = solve_parabolic(op, init, horizon=0.5, nt=25)
    assert res.min_value >= -1e-10
    assert res.sup_nonincreasing
    assert res.final.values[0, 0] == 0.0
    assert res.final.values[-1, -1] == 0.0
    assert len(res.supnorms) == 26


def test_parabolic_requires_corner_compatible_data():
    op = discretize_Ld(PdeGrid(16), 0.5, 1.0)
    with pytest.raises(ValueError, match="corner"):
        solve_parabolic(op, Field(np.ones((17, 17))), horizon=0.1, nt=5)


def test_parabolic_validates_horizon_and_steps():
    op = discretize_Ld(PdeGrid(16), 0.5, 1.0)
    init = Field(np.zeros((17, 17)))
    with pytest.raises(ValueError):
        solve_parabolic(op, init, horizon=0.0, nt=5)
    with pytest.raises(ValueError):
        solve_parabolic(op, init, horizon=0.1, nt=0)


def test_parabolic_preserves_order():
    # Comparison principle: if f <= g nodewise initially, the solves stay
    # ordered (both solved with the same M-matrix stepping).
    op = discretize_Ld(PdeGrid(32), 0.5, 1.0)
    f = Field.from_function(32, 32, lambda x1, x2: x1 * (1 - x1) * x2 * (1 - x2))
    g = Field(f.values + entropy_H(f.nodes()[0]) * entropy_H(f.nodes()[1]) * 0.25)
    rf = solve_parabolic(op, f, horizon=0.4, nt=20)
    rg = solve_parabolic(op, g, horizon=0.4, nt=20)
    assert (rg.final.values - rf.final.values).min() >= -1e-10


# ---------------------------------------------------------------------------
# One-dimensional oracle


def test_single_patch_matches_closed_form():
    z, g = solve_single_patch(0.5, 256)
    exact = tau_lower(z, z, 0.5)
    interior = (z >= 0.1) & (z <= 0.9)
    assert np.abs(g - exact)[interior].max() <= 0.02


def test_single_patch_validates_inputs():
    with pytest.raises(ValueError):
        solve_single_patch(0.0, 64)
    with pytest.raises(ValueError):
        solve_single_patch(0.5, 3)
