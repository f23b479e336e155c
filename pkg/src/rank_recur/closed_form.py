"""Closed-form limits for the tractable system shapes.

Three shapes admit explicit limits:

* autonomous rank selection over M contractions: the limit is the k-th
  largest of the individual fixed points;
* the alternating max pair x_even = max{f1(x_odd), f2(x_even')},
  x_odd = max{g1(x_even), g2(x_odd')} under period-two forcing: the
  limit orbit is written in terms of four fixed points
  r1 = fix(f1 o g1), r2 = g1(r1), r3 = fix(f2), r4 = fix(g2);
* the positive power-law max system with M = P = 2, which is the
  previous shape after a log transform and has fully explicit values.

Fixed points are found by damped iteration at a tolerance tighter than
any downstream comparison, so formula error budgets are dominated by
the formulas themselves, not the roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .block_map import NonConvergenceError
from .expr import ScalarExpr
from .orbits import PeriodicOrbit
from .rank_core import k_rank

__all__ = [
    "FixedPointSet",
    "DEFAULT_FIX_TOL",
    "scalar_fixed_point",
    "autonomous_rank_limit",
    "period_two_fixed_points",
    "period_two_max_orbit",
    "period_two_case",
    "power_period_two_limit",
    "power_period_two_terms",
]

DEFAULT_FIX_TOL = 1e-14
_MAX_ITER = 200_000
_DAMPING = 0.5

ScalarMap = Union[ScalarExpr, Callable[[float], float]]


def _as_callable(f: ScalarMap) -> Callable[[float], float]:
    if isinstance(f, ScalarExpr):
        compiled = f.compiled()
        return lambda x: compiled(x, 0.0)
    return f


def scalar_fixed_point(f: ScalarMap, tol: float = DEFAULT_FIX_TOL,
                       x0: float = 0.0) -> float:
    """Fixed point of a certified scalar contraction.

    Damped iteration x <- x + (f(x) - x)/2 from ``x0``; the damping
    keeps the step map contractive for any slope in (-1, 1).  Stops when
    |f(x) - x| <= tol; an uncertified, non-contractive input shows up as
    non-convergence.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    fn = _as_callable(f)
    x = float(x0)
    trace = []
    for _ in range(_MAX_ITER):
        fx = fn(x)
        res = abs(fx - x)
        trace.append(res)
        if res <= tol:
            return x
        x = x + _DAMPING * (fx - x)
    raise NonConvergenceError(
        f"no fixed point within {_MAX_ITER} iterations "
        f"(last residual {trace[-1]!r}); is the map a contraction?",
        residual_trace=tuple(trace[-100:]), last=np.array([x]))


def autonomous_rank_limit(fs: Sequence[ScalarMap], k: int,
                          tol: float = DEFAULT_FIX_TOL) -> float:
    """Limit of the autonomous recurrence x_n = k-rank{f_i(x_{n-i})}.

    Every seed converges to the k-th largest of the individual fixed
    points r_i = f_i(r_i).
    """
    rs = [scalar_fixed_point(f, tol) for f in fs]
    return k_rank(rs, k)


@dataclass(frozen=True)
class FixedPointSet:
    """Fixed points backing a closed form, with their defining residuals.

    For the period-two max shape the four entries are r1 = fix(f1 o g1),
    r2 = g1(r1), r3 = fix(f2), r4 = fix(g2) and the residuals are
    |f1(r2) - r1|, |g1(r1) - r2|, |f2(r3) - r3|, |g2(r4) - r4|.
    """

    r: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def period_two_fixed_points(
    f1: ScalarMap, f2: ScalarMap, g1: ScalarMap, g2: ScalarMap,
    tol: float = DEFAULT_FIX_TOL,
) -> FixedPointSet:
    """The quadruple (r1, r2, r3, r4) for the alternating max pair.

    r1 is solved on the composition f1 o g1 directly, matching its
    defining equation f1(g1(r1)) = r1.
    """
    c1, c2, c3, c4 = map(_as_callable, (f1, f2, g1, g2))
    r1 = scalar_fixed_point(lambda x: c1(c3(x)), tol)
    r2 = c3(r1)
    r3 = scalar_fixed_point(c2, tol)
    r4 = scalar_fixed_point(c4, tol)
    residuals = (abs(c1(r2) - r1), abs(c3(r1) - r2),
                 abs(c2(r3) - r3), abs(c4(r4) - r4))
    return FixedPointSet((r1, r2, r3, r4), residuals)


def period_two_max_orbit(
    f1: ScalarMap, f2: ScalarMap, g1: ScalarMap, g2: ScalarMap,
    tol: float = DEFAULT_FIX_TOL,
) -> PeriodicOrbit:
    """Attracting orbit of x_even = max{f1(x_odd), f2(x_even_prev)},
    x_odd = max{g1(x_even), g2(x_odd_prev)}.

    Returns x_even = max{f1(max{r2, r4}), r3} and
    x_odd = max{g1(max{r1, r3}), r4}, anchored to the absolute phase:
    entry 0 is the odd-step value, entry 1 the even-step value.  The
    orbit collapses to period 1 when the two values agree within
    10 * tol.
    """
    fps = period_two_fixed_points(f1, f2, g1, g2, tol)
    r1, r2, r3, r4 = fps.r
    c1, c2, c3, c4 = map(_as_callable, (f1, f2, g1, g2))
    x_even = max(c1(max(r2, r4)), r3)
    x_odd = max(c3(max(r1, r3)), r4)
    # Self-check: the pair must reproduce itself through the recurrence.
    residual = max(abs(max(c1(x_odd), c2(x_even)) - x_even),
                   abs(max(c3(x_even), c4(x_odd)) - x_odd))
    if abs(x_even - x_odd) <= 10 * tol:
        return PeriodicOrbit(period=1, phase_values=((x_even + x_odd) / 2.0,),
                             residual=max(residual, abs(x_even - x_odd)))
    return PeriodicOrbit(period=2, phase_values=(x_odd, x_even),
                         residual=residual)


def period_two_case(
    f1: ScalarMap, f2: ScalarMap, g1: ScalarMap, g2: ScalarMap,
    tol: float = DEFAULT_FIX_TOL,
) -> dict:
    """Which branch of the case analysis the instance realises.

    Reports the maximisers of max{r1, r3} and max{r2, r4}, whether the
    even/odd limits come from the coupled maps or the pure fixed points,
    and flags ties at 10 * tol, where the analysis treats either branch
    as valid.
    """
    fps = period_two_fixed_points(f1, f2, g1, g2, tol)
    r1, r2, r3, r4 = fps.r
    c1, c3 = _as_callable(f1), _as_callable(g1)
    even_inner = max(r2, r4)
    odd_inner = max(r1, r3)
    x_even = max(c1(even_inner), r3)
    x_odd = max(c3(odd_inner), r4)
    return {
        "fixed_points": fps,
        "odd_inner_argmax": "r1" if r1 >= r3 else "r3",
        "even_inner_argmax": "r2" if r2 >= r4 else "r4",
        "even_branch": "f1" if c1(even_inner) >= r3 else "r3",
        "odd_branch": "g1" if c3(odd_inner) >= r4 else "r4",
        "ties": tuple(name for name, a, b in [
            ("r1=r3", r1, r3), ("r2=r4", r2, r4),
            ("even", c1(even_inner), r3), ("odd", c3(odd_inner), r4),
        ] if abs(a - b) <= 10 * tol),
    }


def _check_power_args(A: Sequence[Sequence[float]], alpha1: float,
                      alpha2: float) -> tuple[tuple[float, float], tuple[float, float]]:
    rows = tuple(tuple(float(v) for v in row) for row in A)
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError("A must be a 2x2 matrix")
    for row in rows:
        for v in row:
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"coefficient {v!r} is not positive")
    for a in (alpha1, alpha2):
        if not abs(a) < 1:
            raise ValueError(f"exponent {a!r} outside (-1, 1)")
    return rows


def power_period_two_limit(
    A: Sequence[Sequence[float]], alpha1: float, alpha2: float,
) -> tuple[float, float]:
    """Explicit limit of x_n = max{A[p][0]*x_{n-1}^a1, A[p][1]*x_{n-2}^a2}.

    ``A`` follows the package layout: row p is the phase (row 0 applies
    at odd steps, row 1 at even steps), column i the lag.  Returns
    (x_even, x_odd).  Everything is computed in log space, where the
    system is the alternating affine max pair, and exponentiated at the
    end; no iteration is involved.
    """
    rows = _check_power_args(A, alpha1, alpha2)
    a1, a2 = float(alpha1), float(alpha2)
    ln = [[math.log(v) for v in row] for row in rows]
    r1 = (ln[1][0] + a1 * ln[0][0]) / (1.0 - a1 * a1)
    r2 = ln[0][0] + a1 * r1
    r3 = ln[1][1] / (1.0 - a2)
    r4 = ln[0][1] / (1.0 - a2)
    y_even = max(ln[1][0] + a1 * max(r2, r4), r3)
    y_odd = max(ln[0][0] + a1 * max(r1, r3), r4)
    return math.exp(y_even), math.exp(y_odd)


def power_period_two_terms(
    A: Sequence[Sequence[float]], alpha1: float, alpha2: float,
) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """The three-term product expansion of the power-law limit.

    Valid only for alpha1 >= 0: the inner map is then increasing, so the
    max over {r2, r4} (resp. {r1, r3}) distributes through it and each
    phase limit is the plain max of three explicit products.  For
    alpha1 < 0 the distribution is invalid and this raises; use
    :func:`power_period_two_limit`, which holds for every sign.

    Returns (even_terms, odd_terms) with

        even: A[1][0]^{1/(1-a1^2)} * A[0][0]^{a1/(1-a1^2)},
              A[1][0] * A[0][1]^{a1/(1-a2)},
              A[1][1]^{1/(1-a2)}
        odd:  A[0][0]^{1/(1-a1^2)} * A[1][0]^{a1/(1-a1^2)},
              A[0][0] * A[1][1]^{a1/(1-a2)},
              A[0][1]^{1/(1-a2)}
    """
    rows = _check_power_args(A, alpha1, alpha2)
    a1, a2 = float(alpha1), float(alpha2)
    if a1 < 0:
        raise ValueError(
            "the three-term expansion requires alpha1 >= 0; the inner map "
            "must be increasing for the max to distribute")
    q = 1.0 / (1.0 - a1 * a1)
    even = (
        rows[1][0] ** q * rows[0][0] ** (a1 * q),
        rows[1][0] * rows[0][1] ** (a1 / (1.0 - a2)),
        rows[1][1] ** (1.0 / (1.0 - a2)),
    )
    odd = (
        rows[0][0] ** q * rows[1][0] ** (a1 * q),
        rows[0][0] * rows[1][1] ** (a1 / (1.0 - a2)),
        rows[0][1] ** (1.0 / (1.0 - a2)),
    )
    return even, odd
