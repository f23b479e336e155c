import math

import numpy as np
import pytest

from rank_recur.expr import NumericDomainError, parse_scalar
from rank_recur.rank_core import k_rank
from rank_recur.systems import (
    InitialCondition,
    RankSchedule,
    ScalarFamily,
    affine_matrix_system,
    certify_block,
    certify_family,
    family_from_grid,
    max_minus_rank_system,
    phase_index,
    power_max_system,
    rank_family_to_block,
)


def test_phase_index_convention():
    # 1-based step n maps to 0-based phase (n-1) mod P; step 1 is phase 0
    assert [phase_index(n, 4) for n in range(1, 10)] == [0, 1, 2, 3, 0, 1, 2, 3, 0]
    assert phase_index(5, 1) == 0


def test_rank_schedule():
    s = RankSchedule((2, 1, 2))
    assert s.P == 3
    assert RankSchedule.constant(2, 4).ks == (2, 2, 2, 2)
    with pytest.raises(ValueError):
        RankSchedule((0, 1))
    with pytest.raises(ValueError):
        RankSchedule(())


def test_initial_condition():
    ic = InitialCondition.of([1, 2.5])
    assert len(ic) == 2 and ic.values == (1.0, 2.5)
    assert InitialCondition.of(ic) is ic
    with pytest.raises(ValueError):
        InitialCondition.of([1.0, math.nan])


def test_family_phase_periodicity_is_structural():
    fam = family_from_grid(["x + n"], 1, 3)
    for n in range(1, 13):
        assert fam.entry(1, n) is fam.entry(1, n + 3)
    # the substituted phase value matches the 1-based phase of the step
    assert fam.entry(1, 1)(0.0) == 1.0
    assert fam.entry(1, 2)(0.0) == 2.0
    assert fam.entry(1, 4)(0.0) == 1.0


def test_family_grid_shapes():
    fam = family_from_grid([["x", "2*x"], ["x + 1", "x - 1"]], 2, 2)
    assert fam.M == 2 and fam.P == 2
    with pytest.raises(ValueError):
        family_from_grid(["x"], 2, 1)
    with pytest.raises(ValueError):
        family_from_grid([["x"]], 1, 2)


def test_family_entries_must_be_maps_of_x():
    with pytest.raises(ValueError):
        ScalarFamily(1, 1, ((parse_scalar("x + n"),),))


def test_rank_family_to_block_single_contraction():
    fam, sched = affine_matrix_system([[0.5]], [[1.0]], 1)
    system = rank_family_to_block(fam, sched)
    assert system.M == 1 and system.P == 1 and system.s == 1
    assert system.G[0]((3.0,)) == 2.5
    assert system.L_bound is not None and system.L_bound.bound == 0.5


def test_rank_family_to_block_period3_counterexample():
    fam, sched = affine_matrix_system([[-1.0, -1.0]], [[0.0, 0.0]], 1)
    system = rank_family_to_block(fam, sched)
    assert system.L_bound is not None and system.L_bound.bound == 1.0
    assert system.flagged
    assert system.G[0]((1.0, 2.0)) == -1.0  # max(-1, -2)


def test_composition_fidelity_exact():
    rng = np.random.default_rng(11)
    A = rng.uniform(-0.9, 0.9, (3, 4))
    B = rng.uniform(-3, 3, (3, 4))
    fam, sched = affine_matrix_system(A, B, 2)
    system = rank_family_to_block(fam, sched)
    for p in range(3):
        for _ in range(50):
            ys = tuple(float(v) for v in rng.uniform(-5, 5, 4))
            parts = [fam.f[i][p](ys[i]) for i in range(4)]
            assert system.G[p](ys) == k_rank(parts, 2)


def test_affine_matrix_system_bounds():
    fam, sched = affine_matrix_system([[0.5, -0.3], [0.2, 0.8]],
                                      [[1.0, 0.0], [-2.0, 3.0]], 2)
    assert fam.alpha_bound is not None
    assert fam.alpha_bound.bound == 0.8
    assert fam.alpha_bound.exact
    assert not fam.flagged
    assert sched.ks == (2, 2)
    flagged, _ = affine_matrix_system([[1.5]], [[0.0]], 1)
    assert flagged.alpha_bound.bound == 1.5 and flagged.flagged


def test_affine_matrix_shape_mismatch():
    with pytest.raises(ValueError):
        affine_matrix_system([[0.5]], [[1.0, 2.0]], 1)
    with pytest.raises(ValueError):
        affine_matrix_system([[0.5]], [[1.0]], 2)


def test_affine_block_pair_ratios_never_exceed_alpha():
    rng = np.random.default_rng(5)
    A = rng.uniform(-0.9, 0.9, (2, 3))
    B = rng.uniform(-3, 3, (2, 3))
    fam, sched = affine_matrix_system(A, B, 1)
    system = rank_family_to_block(fam, sched)
    alpha = fam.alpha_bound.bound
    for p in range(2):
        xs = rng.uniform(-5, 5, (10_000, 3))
        ys = xs + rng.uniform(-1, 1, (10_000, 3))
        for i in range(200):  # spot rows; full scan is the certification job
            x = tuple(float(v) for v in xs[i])
            y = tuple(float(v) for v in ys[i])
            d = max(abs(a - b) for a, b in zip(x, y))
            if d == 0:
                continue
            assert abs(system.G[p](x) - system.G[p](y)) <= alpha * d + 1e-12


def test_power_system_log_form():
    fam, sched = power_max_system([[1.1, 2.0], [0.7, 1.3]], (0.5, -0.3), "log")
    assert sched.ks == (1, 1)
    assert fam.alpha_bound.bound == 0.5 and fam.alpha_bound.exact
    # entry (lag 1, phase 1): y -> 0.5*y + ln(1.1)
    assert fam.f[0][0](2.0) == 0.5 * 2.0 + math.log(1.1)


def test_power_system_constant_exponents():
    fam, _ = power_max_system([[2.0, 3.0]], (0.0, 0.0), "log")
    vals = [fam.f[i][0](123.0) for i in range(2)]
    assert max(vals) == math.log(3.0)


def test_power_system_raw_domain():
    fam, _ = power_max_system([[1.5]], (0.5,), "raw")
    assert fam.positive_domain
    assert fam.alpha_bound is None
    assert fam.f[0][0](4.0) == 1.5 * 2.0
    with pytest.raises(NumericDomainError):
        fam.f[0][0](-1.0)


def test_power_system_validation():
    with pytest.raises(ValueError):
        power_max_system([[0.0]], (0.5,), "log")
    with pytest.raises(ValueError):
        power_max_system([[1.0]], (1.0,), "log")
    with pytest.raises(ValueError):
        power_max_system([[1.0]], (0.5,), "sqrt")


def test_log_raw_duality():
    rng = np.random.default_rng(3)
    A = np.exp(rng.uniform(-1, 1, (2, 2)))
    alphas = (0.6, -0.4)
    log_fam, log_sched = power_max_system(A, alphas, "log")
    raw_fam, raw_sched = power_max_system(A, alphas, "raw")
    x = [1.7, 0.4]
    y = [math.log(v) for v in x]
    for n in range(3, 1003):
        p = phase_index(n, 2)
        yv = max(log_fam.f[i][p](y[-1 - i]) for i in range(2))
        xv = max(raw_fam.f[i][p](x[-1 - i]) for i in range(2))
        y.append(yv)
        x.append(xv)
        assert math.isclose(math.exp(yv), xv, rel_tol=1e-12)


def test_max_minus_rank_schedule_and_shape():
    fs = [parse_scalar(f"0.5*x + {b}") for b in (1.0, 2.0, 3.0)]
    system = max_minus_rank_system(fs, 3)
    assert system.M == 3 and system.P == 3
    # step with phase p uses rank index 1 + (p mod P), p the 1-based phase
    ys = (1.0, 2.0, 3.0)
    parts = [fs[i](ys[i]) for i in range(3)]
    for p in range(3):
        k = 1 + ((p + 1) % 3)
        expected = 0.5 * (max(parts) - k_rank(parts, k))
        assert system.G[p](ys) == expected


def test_max_minus_rank_requires_p_le_m():
    fs = [parse_scalar("0.5*x")]
    with pytest.raises(ValueError):
        max_minus_rank_system(fs, 2)
    assert max_minus_rank_system(fs, 1).M == 1


def test_certify_family_covers_every_entry():
    fam = family_from_grid([["0.5*x + 1", "x^2"], ["cos(x)", "0.1*x"]], 2, 2)
    fam2, cert = certify_family(fam, domain=(-2.0, 2.0))
    assert len(cert.rows) == 4
    labels = {r.label for r in cert.rows}
    assert labels == {"lag 1, phase 1", "lag 1, phase 2",
                      "lag 2, phase 1", "lag 2, phase 2"}
    # x^2 on [-2, 2] has slope up to 4: dominates and refutes contraction
    assert cert.bound.bound > 1.0
    assert cert.flagged and fam2.flagged


def test_certify_block_keeps_construction_bound():
    fam, sched = affine_matrix_system([[0.5, -0.3]], [[1.0, 0.0]], 1)
    system = rank_family_to_block(fam, sched)
    system2, cert = certify_block(system, seed=1)
    assert system2.L_bound.bound == 0.5  # exact figure wins over sampling
    assert cert.bound.method == "pair-sampling"
    assert cert.bound.bound <= 0.5 * (1 + 1e-7)
