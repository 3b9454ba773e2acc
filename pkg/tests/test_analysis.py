"""Unit tests for the comparison/convergence/sweep studies."""

import numpy as np
import pytest

from twopatch import (
    DEFAULT_SLACK_SAFETY,
    Field,
    ModelParams,
    PdeGrid,
    SlackCalibration,
    calibrate_slack,
    compare_fields,
    convergence_study,
    d_limit_check,
    discretize_Ld,
    kappa_sweep,
    restrict_to_chain_nodes,
    semigroup_pde_gap,
    solve_elliptic,
)


# ---------------------------------------------------------------------------
# Comparison helpers


def test_compare_fields_pass_and_fail():
    lower = Field(np.zeros((5, 5)))
    upper = Field(np.full((5, 5), 0.1))
    rep = compare_fields(lower, upper, tolerance=0.01, name="toy")
    assert rep.passed and rep.min_margin == pytest.approx(0.1)
    bad = Field(np.full((5, 5), -0.1))
    rep2 = compare_fields(lower, bad, tolerance=0.01, name="toy")
    assert not rep2.passed
    assert rep2.min_margin == pytest.approx(-0.1)
    assert rep2.as_dict()["name"] == "toy"


def test_restrict_to_chain_nodes_subsamples_exactly():
    p = ModelParams(4, 2, 1.0)
    f = Field.from_function(16, 16, lambda x1, x2: x1 + 10.0 * x2)
    sub = restrict_to_chain_nodes(f, p)
    assert sub.values.shape == (5, 3)
    assert sub.values[4, 0] == pytest.approx(1.0)
    assert sub.values[0, 2] == pytest.approx(10.0)


def test_restrict_requires_aligned_grid():
    p = ModelParams(5, 3, 1.0)
    f = Field(np.zeros((17, 17)))
    with pytest.raises(ValueError, match="multiple"):
        restrict_to_chain_nodes(f, p)


def test_slack_calibration_linear_in_h():
    cal = calibrate_slack(0.5)
    assert isinstance(cal, SlackCalibration)
    assert cal.c > 0.0
    assert cal.safety == DEFAULT_SLACK_SAFETY
    assert cal.epsilon(1.0 / 128) == pytest.approx(cal.c / 128)
    assert cal.epsilon(1.0 / 256) == pytest.approx(cal.epsilon(1.0 / 128) / 2)


def test_slack_calibration_magnitude():
    # The 1-D solver error is first order with a constant near 2; the
    # recorded constant carries the safety factor on top.
    cal = calibrate_slack(1.0)
    assert 0.5 <= cal.c / DEFAULT_SLACK_SAFETY <= 4.0


# ---------------------------------------------------------------------------
# Convergence study


def test_convergence_rows_shrink():
    tau = solve_elliptic(discretize_Ld(PdeGrid(64), 1.0, 1.0))
    rows = convergence_study([ModelParams(8, 8, 1.0), ModelParams(16, 16, 1.0)], tau)
    assert rows[0].n1 == 8 and rows[1].n1 == 16
    assert rows[1].sup_error < rows[0].sup_error


def test_convergence_zero_reference_zero_error():
    p = ModelParams(4, 4, 1.0)
    tau = solve_elliptic(discretize_Ld(PdeGrid(16), 1.0, 1.0))
    ref = Field(np.zeros_like(tau.values))
    # Against a zero field the error equals the chain solution's sup norm.
    rows = convergence_study([p], ref)
    assert rows[0].sup_error > 0.0


# ---------------------------------------------------------------------------
# d-limit sandwich rows


def test_d_limit_rows_report_honest_verdicts():
    rows = d_limit_check(1.0, [0.1, 0.05], PdeGrid(48))
    assert [r.d for r in rows] == [0.1, 0.05]
    for r in rows:
        # Lower half always holds; the literal nodewise upper bound fails at
        # the conflict corners where the width vanishes, and is reported so.
        assert r.min_lower_margin >= -r.epsilon
        assert r.max_overshoot > r.epsilon
        assert not r.bound_ok
        assert r.interior_max_gap < r.max_gap
    assert rows[1].interior_max_gap < rows[0].interior_max_gap


def test_d_limit_validates_inputs():
    with pytest.raises(ValueError):
        d_limit_check(1.0, [], PdeGrid(16))
    with pytest.raises(ValueError):
        d_limit_check(1.0, [1.5], PdeGrid(16))
    with pytest.raises(ValueError):
        d_limit_check(1.0, [0.5], PdeGrid(16), interior_margin=0.7)


# ---------------------------------------------------------------------------
# kappa sweep


def test_kappa_sweep_center_grows_as_kappa_shrinks():
    rows = kappa_sweep([1.0, 0.5, 0.1], 0.5, PdeGrid(48))
    centers = [r.tau_center for r in rows]
    assert centers[0] < centers[1] < centers[2]
    for r in rows:
        assert r.barrier_min_margin >= -r.epsilon


def test_kappa_sweep_rejects_nonpositive():
    with pytest.raises(ValueError):
        kappa_sweep([1.0, 0.0], 0.5, PdeGrid(16))
    with pytest.raises(ValueError):
        kappa_sweep([], 0.5, PdeGrid(16))


# ---------------------------------------------------------------------------
# Semigroup vs parabolic PDE


def test_semigroup_pde_gap_shrinks_with_n():
    f = lambda x1, x2: x1 * (1.0 - x1)
    gaps = [
        semigroup_pde_gap(ModelParams(n, n, 1.0), f, 0.25, PdeGrid(96), nt=50)
        for n in (8, 16)
    ]
    assert gaps[1] < gaps[0]
    assert gaps[1] <= 0.02
