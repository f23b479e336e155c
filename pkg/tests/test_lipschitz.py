import math

import pytest

from rank_recur.expr import NumericDomainError, parse_block, parse_scalar
from rank_recur.lipschitz import (
    DEFAULT_SAFETY_FACTOR,
    DomainInterval,
    estimate_block_lipschitz,
    estimate_scalar_lipschitz,
    linear_coefficients,
)


def test_domain_interval_validation():
    with pytest.raises(ValueError):
        DomainInterval(2.0, 2.0)
    with pytest.raises(ValueError):
        DomainInterval(3.0, 1.0)
    with pytest.raises(ValueError):
        DomainInterval(0.0, math.inf)
    d = DomainInterval.of((-1.0, 4.0))
    assert d.lo == -1.0 and d.hi == 4.0 and d.width == 5.0


def test_linear_coefficients():
    assert linear_coefficients(parse_scalar("0.5*x + 1").ast) == (0.5, 1.0)
    assert linear_coefficients(parse_scalar("1 - x/4").ast) == (-0.25, 1.0)
    assert linear_coefficients(parse_scalar("2*x/4 + 1 - x").ast) == (-0.5, 1.0)
    assert linear_coefficients(parse_scalar("3.5").ast) == (0.0, 3.5)
    assert linear_coefficients(parse_scalar("x*cos(2)").ast) == (math.cos(2.0), 0.0)
    assert linear_coefficients(parse_scalar("x^2").ast) is None
    assert linear_coefficients(parse_scalar("max(x, 0)").ast) is None
    assert linear_coefficients(parse_scalar("1/x").ast) is None


def test_affine_is_exact_and_parameter_free():
    f = parse_scalar("0.5*x + 1")
    a = estimate_scalar_lipschitz(f)
    b = estimate_scalar_lipschitz(f, domain=(-2.0, 3.0), grid_points=17,
                                  safety_factor=2.0)
    assert a.bound == 0.5 == b.bound
    assert a.method == "analytic-affine" == b.method
    assert a.exact and a.certifies_contraction
    assert a.witness is None


def test_affine_through_constant_folding():
    est = estimate_scalar_lipschitz(parse_scalar("x*exp(0) - sin(pi)"))
    assert est.method == "analytic-affine"
    assert est.bound == 1.0


def test_tent_bound_flagged():
    f = parse_scalar("max(1 - 2*x, 2*x - 1)")
    est = estimate_scalar_lipschitz(f, domain=(-2.0, 2.0))
    assert est.method == "derivative-sampling"
    assert 2.0 <= est.bound <= 2.0 * DEFAULT_SAFETY_FACTOR * 1.001
    assert est.refutes_contraction
    assert est.witness is not None


def test_median_worst_phase_bound():
    # slope sup of exp(0.15 - x^2) is sqrt(2)*exp(-0.35) = 0.9965794537229931,
    # under 1 only without the safety margin; the default 1.05 pushes it over
    f = parse_scalar("exp(0.15*1 - x^2)")
    raw = estimate_scalar_lipschitz(f, domain=(-5.0, 5.0), safety_factor=1.0)
    assert 0.995 < raw.bound < 1.0
    assert math.isclose(raw.bound, 0.9965794537229931, rel_tol=1e-5)
    assert raw.certifies_contraction
    dflt = estimate_scalar_lipschitz(f, domain=(-5.0, 5.0))
    assert dflt.bound > 1.0
    assert dflt.refutes_contraction


def test_sampling_error_reports_sample_point():
    f = parse_scalar("ln(x)")
    with pytest.raises(NumericDomainError) as exc:
        estimate_scalar_lipschitz(f, domain=(-1.0, 1.0))
    assert "x=" in str(exc.value)


def test_block_sum_map_bound():
    g = parse_block("0.3*y1 + 0.3*y2", 2)
    est = estimate_block_lipschitz(g)
    assert est.method == "pair-sampling"
    # lower-bound method measured on the rounded map; allow float noise only
    assert est.bound <= 0.6 * (1 + 1e-7)
    assert est.bound >= 0.59
    assert est.witness is not None and len(est.witness) == 4


def test_block_rank_map_never_expands():
    g = parse_block("rank(2; y1, y2, y3)", 3)
    est = estimate_block_lipschitz(g)
    # pure selection: every quotient is exactly a ratio of differences
    assert est.bound <= 1.0
    assert est.bound >= 0.99


def test_block_projection_reaches_one():
    est = estimate_block_lipschitz(parse_block("y1", 3))
    assert est.bound == 1.0


def test_block_estimate_deterministic():
    g = parse_block("max(y1, 0.5*y2)", 2)
    a = estimate_block_lipschitz(g, seed=3)
    b = estimate_block_lipschitz(g, seed=3)
    c = estimate_block_lipschitz(g, seed=4)
    assert a.bound == b.bound and a.witness == b.witness
    assert c.bound != a.bound or c.witness != a.witness


PAIR_VS_DERIVATIVE_SUITE = ["0.5*y1", "sin(y1)", "0.3*y1^2", "exp(0.2*y1)",
                            "abs(y1)", "y1/(1 + y1^2)"]


@pytest.mark.parametrize("src", PAIR_VS_DERIVATIVE_SUITE)
def test_pair_sampling_below_derivative_bound(src):
    dom = (-2.0, 2.0)
    pair = estimate_block_lipschitz(parse_block(src, 1), domain=dom,
                                    pairs=20_000)
    deriv = estimate_scalar_lipschitz(parse_scalar(src.replace("y1", "x")),
                                      domain=dom)
    assert pair.bound <= deriv.bound * (1 + 1e-7)


def test_grid_scales_with_domain():
    f = parse_scalar("x^2")  # slope 2|x|, so the bound tracks the window edge
    small = estimate_scalar_lipschitz(f, domain=(-1.0, 1.0), safety_factor=1.0)
    large = estimate_scalar_lipschitz(f, domain=(-4.0, 4.0), safety_factor=1.0)
    assert math.isclose(small.bound, 2.0, rel_tol=1e-3)
    assert math.isclose(large.bound, 8.0, rel_tol=1e-3)
    assert small.domain == DomainInterval(-1.0, 1.0)
