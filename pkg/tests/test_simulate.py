import math

import numpy as np
import pytest

from rank_recur.block_map import solve_fixed_point, extract_periodic_orbit
from rank_recur.orbits import orbit_distance
from rank_recur.simulate import (
    TrajectoryError,
    convergence_report,
    detect_period,
    iterate,
    system_bound,
    system_flagged,
)
from rank_recur.sysfile import load_system_file
from rank_recur.systems import RankSchedule, affine_matrix_system


def period3_system(fixture_path):
    return load_system_file(fixture_path("period3.toml")).runnable


def test_hand_computed_trajectory(fixture_path):
    t = iterate(period3_system(fixture_path), [1.0, 2.0], 9)
    assert list(t.values) == [1, 2, -1, 1, 1, -1, 1, 1, -1]
    assert t.N == 9
    assert t.phase_of(5) == 1  # P = 1: every step is phase 1


def test_scalar_contraction_settles():
    system = affine_matrix_system([[0.5]], [[1.0]], 1)
    t = iterate(system, [0.0], 200)
    assert abs(t.values[-1] - 2.0) <= 1e-12
    assert system_bound(system) == 0.5
    assert not system_flagged(system)


def test_block_seed_continues_short_seed():
    system = affine_matrix_system([[0.5], [-0.4]], [[1.0], [2.0]], 1)
    t_short = iterate(system, [3.0], 40)
    t_block = iterate(system, t_short.values[:2], 40)
    assert np.array_equal(t_short.values, t_block.values)


def test_iterate_argument_validation():
    system = affine_matrix_system([[0.5], [-0.4]], [[1.0], [2.0]], 1)
    with pytest.raises(ValueError):
        iterate(system, [1.0, 2.0, 3.0], 10)  # neither M nor P*M
    with pytest.raises(ValueError):
        iterate(system, [1.0], 0)
    fam, _ = affine_matrix_system([[0.5, 0.1]], [[1.0, 0.0]], 1)
    with pytest.raises(ValueError):
        iterate((fam, RankSchedule((3,))), [0.0, 0.0], 10)


def test_detect_period_three_anchored(fixture_path):
    t = iterate(period3_system(fixture_path), [1.0, 2.0], 3000)
    orbit = detect_period(t, p_max=8)
    assert orbit is not None
    assert orbit.period == 3
    assert orbit.phase_values == (1.0, 1.0, -1.0)
    assert orbit.onset == 3
    assert orbit.residual == 0.0
    # anchoring: value_at matches the trajectory at absolute indices
    for n in (2998, 2999, 3000):
        assert orbit.value_at(n) == t.values[n - 1]


def test_detect_constant_tail_any_pmax():
    system = affine_matrix_system([[0.5]], [[1.0]], 1)
    t = iterate(system, [0.0], 400)
    for p_max in (1, 7, 32):
        orbit = detect_period(t, p_max=p_max)
        assert orbit.period == 1
        assert abs(orbit.phase_values[0] - 2.0) <= 1e-9


def test_detect_forced_median_period(doc_system_path):
    sysdef = load_system_file(doc_system_path("median_p4.toml"))
    t = iterate(sysdef.runnable, [0.5, 0.5, 0.5], 4000)
    orbit = detect_period(t, p_max=16, tol=1e-10)
    assert orbit is not None
    assert orbit.period == 4
    # the same limit through the block route, compared at matching phase
    res = solve_fixed_point(sysdef.block, tol=1e-12)
    block_orbit = extract_periodic_orbit(res.x_star, sysdef.P, tol=1e-10)
    assert block_orbit.period == 4
    assert orbit_distance(orbit, block_orbit) <= 1e-9


def test_detect_returns_none_for_chaotic_tail(fixture_path):
    sysdef = load_system_file(fixture_path("tent_forced.toml"))
    t = iterate(sysdef.runnable, [0.2], 10_000)
    assert detect_period(t, p_max=64) is None


def test_detect_tail_too_short(fixture_path):
    sysdef = load_system_file(fixture_path("tent_forced.toml"))
    t = iterate(sysdef.runnable, [0.2], 100)
    with pytest.raises(ValueError) as exc:
        detect_period(t, p_max=64)
    assert "p_max" in str(exc.value)
    with pytest.raises(ValueError):
        detect_period(t, p_max=0)
    with pytest.raises(ValueError):
        detect_period(t, p_max=4, tail_fraction=0.0)


def test_trajectory_error_carries_step_and_partial(fixture_path):
    sysdef = load_system_file(fixture_path("ln_escape.toml"))
    with pytest.raises(TrajectoryError) as exc:
        iterate(sysdef.runnable, [6.0], 50)
    err = exc.value
    # x2 = ln(6 - 5) = 0, then ln(0 - 5) fails at step 3
    assert err.step == 3
    assert list(err.partial) == [6.0, 0.0]
    assert "ln" in str(err)
    assert "x" in err.env


def test_convergence_report_two_seeds():
    system = affine_matrix_system(
        [[0.5, -0.3], [0.2, 0.4]], [[1.0, 0.0], [-2.0, 3.0]], 2)
    report = convergence_report(system, [[0.0, 0.0], [9.0, -4.0]], 4000)
    assert report.all_detected
    assert report.max_distance <= 2e-9
    assert report.alpha_bound == 0.5
    rate = report.rate
    assert math.isfinite(rate)
    assert rate <= 0.5 + 0.05


def test_convergence_report_detection_failure_is_reported(fixture_path):
    sysdef = load_system_file(fixture_path("tent_forced.toml"))
    report = convergence_report(
        sysdef.runnable, [[0.2], [0.7]], 4000, p_max=16)
    assert not report.all_detected
    assert report.orbits == (None, None)
    assert math.isnan(report.max_distance)
    with pytest.raises(ValueError):
        convergence_report(sysdef.runnable, [[0.2]], 4000)


def test_iteration_is_deterministic(doc_system_path):
    sysdef = load_system_file(doc_system_path("median_p4.toml"))
    a = iterate(sysdef.runnable, [0.5, 0.5, 0.5], 2000)
    b = iterate(sysdef.runnable, [0.5, 0.5, 0.5], 2000)
    assert np.array_equal(a.values, b.values)


def test_block_system_route_matches_family_route(doc_system_path):
    sysdef = load_system_file(doc_system_path("affine_p2.toml"))
    fam_traj = iterate(sysdef.runnable, [1.0, -1.0], 60)
    blk_traj = iterate(sysdef.block, [1.0, -1.0], 60)
    assert np.array_equal(fam_traj.values, blk_traj.values)
