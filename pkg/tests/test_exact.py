"""Unit tests for the exact kernel, hitting-time solver, and semigroup."""

import numpy as np
import pytest

from twopatch import (
    Field,
    GridState,
    ModelParams,
    StateSpaceError,
    build_exchange_matrix,
    build_transition_matrix,
    conditional_means,
    iterate_semigroup,
    solve_hitting_times,
    square_displacement,
)
from twopatch.exact import STATE_CAP_DEFAULT


# ---------------------------------------------------------------------------
# Kernel structure


def test_tiny_chain_row_is_hand_kernel():
    # n1=n2=1, kappa=0.5: from (0,1) the exchanged densities are (1/2, 1/2),
    # so all four states are equally likely.
    tm = build_transition_matrix(ModelParams(1, 1, 0.5))
    # State order is row-major over (j1, j2); (0,1) is index 1.
    np.testing.assert_allclose(tm.matrix[1], [0.25, 0.25, 0.25, 0.25], atol=1e-15)


def test_rows_sum_to_one():
    tm = build_transition_matrix(ModelParams(7, 4, 0.9))
    np.testing.assert_allclose(tm.matrix.sum(axis=1), 1.0, atol=1e-12)
    assert tm.matrix.min() >= 0.0


def test_absorbing_rows_are_point_masses():
    p = ModelParams(5, 3, 1.0)
    tm = build_transition_matrix(p)
    first, last = 0, p.n_states - 1
    for idx in (first, last):
        row = tm.matrix[idx]
        assert row[idx] == 1.0
        assert row.sum() == 1.0
        assert np.count_nonzero(row) == 1


def test_stats_keys():
    tm = build_transition_matrix(ModelParams(3, 3, 0.5))
    s = tm.stats()
    assert set(s) == {"n_states", "min_entry", "max_row_sum_deviation", "renormalized_rows"}
    assert s["n_states"] == 16


def test_state_cap_enforced():
    with pytest.raises(StateSpaceError):
        build_transition_matrix(ModelParams(200, 200, 1.0))
    assert STATE_CAP_DEFAULT == 20_000


def test_conditional_means_equal_exchanged_densities():
    p = ModelParams(6, 4, 0.8)
    tm = build_transition_matrix(p)
    a = build_exchange_matrix(p)
    dens = np.array(
        [GridState(j1, j2).density(p) for j1 in range(p.n1 + 1) for j2 in range(p.n2 + 1)]
    )
    e1, e2 = a.apply(dens[:, 0], dens[:, 1])
    np.testing.assert_allclose(conditional_means(tm), np.column_stack([e1, e2]), atol=1e-13)


def test_square_displacement_bounds():
    tm = build_transition_matrix(ModelParams(8, 8, 1.0))
    sq = square_displacement(tm)
    assert sq.min() >= 0.0
    assert sq.max() <= 2.0
    # Absorbing states do not move.
    assert sq[0] == 0.0 and sq[-1] == 0.0


# ---------------------------------------------------------------------------
# Hitting times


def test_tiny_chain_hitting_time_exact():
    tab = solve_hitting_times(ModelParams(1, 1, 0.5))
    assert tab.value(1, 0) == pytest.approx(2.0, abs=1e-12)
    assert tab.value(0, 1) == pytest.approx(2.0, abs=1e-12)
    assert tab.value(0, 0) == 0.0
    assert tab.value(1, 1) == 0.0
    assert tab.residual <= 1e-10


def test_hitting_times_positive_off_absorbing():
    tab = solve_hitting_times(ModelParams(6, 3, 1.0))
    vals = tab.field.values.copy()
    assert vals[0, 0] == 0.0 and vals[-1, -1] == 0.0
    vals[0, 0] = vals[-1, -1] = np.inf
    assert vals.min() > 0.0


def test_hitting_times_reject_kappa_zero():
    with pytest.raises(ValueError, match="absorption"):
        solve_hitting_times(ModelParams(4, 4, 0.0))


def test_hitting_times_respect_cap():
    with pytest.raises(StateSpaceError):
        solve_hitting_times(ModelParams(300, 100, 1.0))


def test_species_swap_symmetry_exact():
    T = solve_hitting_times(ModelParams(9, 5, 1.0)).field.values
    assert np.abs(T - T[::-1, ::-1]).max() <= 5e-9


def test_patch_swap_symmetry_equal_sizes():
    T = solve_hitting_times(ModelParams(7, 7, 0.6)).field.values
    assert np.abs(T - T.T).max() <= 5e-9


def test_reusing_prebuilt_kernel_matches():
    p = ModelParams(5, 5, 1.0)
    tm = build_transition_matrix(p)
    a = solve_hitting_times(p).field.values
    b = solve_hitting_times(p, tm=tm).field.values
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# Semigroup iteration


def test_semigroup_preserves_constants():
    p = ModelParams(5, 4, 0.7)
    ones = Field(np.ones((6, 5)))
    out = iterate_semigroup(ones, 3, p)
    np.testing.assert_allclose(out.values, 1.0, atol=1e-12)


def test_semigroup_zero_steps_is_identity():
    p = ModelParams(4, 4, 1.0)
    f = Field.from_function(4, 4, lambda x1, x2: x1 * x2)
    out = iterate_semigroup(f, 0, p)
    np.testing.assert_array_equal(out.values, f.values)


def test_semigroup_contracts_sup_norm_and_keeps_sign():
    p = ModelParams(6, 6, 1.0)
    f = Field.from_function(6, 6, lambda x1, x2: x1 * (1 - x1) * x2)
    prev = np.abs(f.values).max()
    cur = f
    for _ in range(4):
        cur = iterate_semigroup(cur, 1, p)
        assert cur.values.min() >= -1e-15
        m = np.abs(cur.values).max()
        assert m <= prev + 1e-12
        prev = m


def test_semigroup_one_step_linear_mean_identity():
    # For f(x) = x1 the kernel mean is the exchanged density (A x)_1.
    p = ModelParams(5, 5, 0.9)
    f = Field.from_function(5, 5, lambda x1, x2: x1 + 0.0 * x2)
    out = iterate_semigroup(f, 1, p)
    a = build_exchange_matrix(p)
    x1, x2 = f.nodes()
    e1, _ = a.apply(x1, x2)
    np.testing.assert_allclose(out.values, e1, atol=1e-12)


def test_semigroup_rejects_negative_steps():
    p = ModelParams(4, 4, 1.0)
    f = Field(np.zeros((5, 5)))
    with pytest.raises(ValueError):
        iterate_semigroup(f, -1, p)
