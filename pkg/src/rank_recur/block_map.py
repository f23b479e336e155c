"""The one-block advance map and its fixed point.

Grouping a trajectory into blocks of s = P*M consecutive values turns
the recurrence into an autonomous map on R^s: component k of the image
is the recurrence applied at phase 1 + ((k-1) mod P), reading the M most
recent values from the input block extended by the components already
computed.  When every update map is sup-contractive the block map is a
sup-norm contraction, its unique fixed point is found by plain
iteration, and agreement of the fixed point with its own P-shift forces
the P-periodic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import NumericDomainError, eval_checked
from .orbits import PeriodicOrbit
from .rank_core import sup_distance
from .systems import BlockSystem, InitialCondition

__all__ = [
    "BlockMap",
    "FixedPointResult",
    "ShiftCommutationReport",
    "CertificationError",
    "NonConvergenceError",
    "apply_block_map",
    "solve_fixed_point",
    "shift_commutation_check",
    "extract_periodic_orbit",
]

DEFAULT_SOLVE_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000


class CertificationError(RuntimeError):
    """A solve was requested on a system flagged non-contractive."""


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance.

    Carries the residual trace for diagnosis; expected behaviour for the
    flagged counterexample systems when forced.
    """

    def __init__(self, message: str, residual_trace: tuple[float, ...],
                 last: np.ndarray):
        super().__init__(message)
        self.residual_trace = residual_trace
        self.last = last


class BlockMap:
    """Callable advancing one whole block of s = P*M values."""

    def __init__(self, system: BlockSystem):
        self.system = system
        self._gs = [(g.compiled(), g.ast, g.params) for g in system.G]

    @property
    def s(self) -> int:
        return self.system.s

    def __call__(self, y: Sequence[float]) -> np.ndarray:
        return apply_block_map(self, y)


def _coerce(F: "BlockMap | BlockSystem") -> BlockMap:
    if isinstance(F, BlockMap):
        return F
    return BlockMap(F)


def apply_block_map(F: "BlockMap | BlockSystem", y: Sequence[float]) -> np.ndarray:
    """One application of the block map.

    Component k consumes, most recent first, the components 1..k-1
    already produced and then the tail of the input block; equivalently,
    the extended list (y_1..y_s, F_1, ..., F_{k-1}) is read backwards
    through a window of M.  Computed iteratively, so s is bounded by
    memory rather than recursion depth.
    """
    F = _coerce(F)
    system = F.system
    s, M, P = system.s, system.M, system.P
    ext = [float(v) for v in y]
    if len(ext) != s:
        raise ValueError(f"block has length {len(ext)}, expected s={s}")
    for k in range(1, s + 1):
        compiled, ast, params = F._gs[(k - 1) % P]
        args = tuple(ext[-1 - j] for j in range(M))
        try:
            value = eval_checked(compiled, ast, params, args)
        except NumericDomainError as exc:
            err = NumericDomainError(f"block component {k}: {exc}")
            err.node = exc.node
            err.env = exc.env
            raise err from None
        ext.append(value)
    return np.array(ext[s:])


@dataclass(frozen=True)
class FixedPointResult:
    """Accepted fixed point with convergence diagnostics.

    ``residual`` is the sup distance between the returned point and its
    image under one more application.  ``contraction_ratio_estimate`` is
    the last observed step-to-step residual ratio (nan when fewer than
    two iterations ran).
    """

    x_star: np.ndarray
    iterations: int
    residual: float
    contraction_ratio_estimate: float
    residual_trace: tuple[float, ...]


def solve_fixed_point(
    F: "BlockMap | BlockSystem",
    seed: "InitialCondition | Sequence[float] | None" = None,
    tol: float = DEFAULT_SOLVE_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    force: bool = False,
) -> FixedPointResult:
    """Iterate y <- F(y) until the sup-norm step drops below ``tol``.

    Systems whose recorded bound is at or above 1 are refused unless
    ``force`` is set; with a contraction figure alpha the iteration count
    is about log(tol)/log(alpha), under 2800 for alpha up to 0.99.
    The default seed is the zero block, or the all-ones block for
    systems restricted to positive values.
    """
    F = _coerce(F)
    system = F.system
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter}")
    if system.flagged and not force:
        assert system.L_bound is not None
        raise CertificationError(
            f"system bound {system.L_bound.bound!r} "
            f"({system.L_bound.method}) does not certify contraction; "
            f"pass force to iterate anyway")
    if seed is None:
        fill = 1.0 if system.positive_domain else 0.0
        y = np.full(F.s, fill)
    else:
        seed = InitialCondition.of(seed)
        if len(seed) != F.s:
            raise ValueError(f"seed has length {len(seed)}, expected s={F.s}")
        y = np.array(seed.values)

    trace: list[float] = []
    for it in range(1, max_iter + 1):
        y_next = F(y)
        step = sup_distance(y_next, y)
        trace.append(step)
        if step < tol:
            image = F(y_next)
            return FixedPointResult(
                x_star=y_next,
                iterations=it,
                residual=sup_distance(image, y_next),
                contraction_ratio_estimate=(
                    trace[-1] / trace[-2] if len(trace) >= 2 and trace[-2] > 0
                    else math.nan),
                residual_trace=tuple(trace),
            )
        y = y_next
    raise NonConvergenceError(
        f"no fixed point within {max_iter} iterations "
        f"(last step {trace[-1]!r}, tol {tol!r})",
        residual_trace=tuple(trace), last=y)


@dataclass(frozen=True)
class ShiftCommutationReport:
    """Componentwise check that the fixed point equals its own P-shift."""

    passed: bool
    max_violation: float
    P: int
    tol: float


def shift_commutation_check(
    F: "BlockMap | BlockSystem",
    x_star: Sequence[float],
    P: int | None = None,
    tol: float = DEFAULT_SOLVE_TOL,
) -> ShiftCommutationReport:
    """Verify |x*_{j+P} - x*_j| <= tol for all j.

    This is the shift-commutation consequence evaluated on the fixed
    point: the shifted block is again a fixed point, and uniqueness
    forces equality, so the solved block must be P-periodic inside.
    """
    F = _coerce(F)
    if P is None:
        P = F.system.P
    x = np.asarray(list(x_star), dtype=float)
    if len(x) != F.s:
        raise ValueError(f"x_star has length {len(x)}, expected s={F.s}")
    if len(x) > P:
        max_violation = float(np.max(np.abs(x[P:] - x[:-P])))
    else:
        max_violation = 0.0
    return ShiftCommutationReport(max_violation <= tol, max_violation, P, tol)


def _divisors(P: int) -> list[int]:
    return [p for p in range(1, P + 1) if P % p == 0]


def extract_periodic_orbit(
    x_star: Sequence[float],
    P: int,
    tol: float = DEFAULT_SOLVE_TOL,
) -> PeriodicOrbit:
    """Read the periodic limit out of a solved block.

    Requires the P-shift check to hold at ``tol``.  The reported period
    is the smallest divisor p of P with |x*_{j+p} - x*_j| <= 10*tol (the
    slack keeps period claims robust at the solver's accuracy); phase
    values average the repetitions and the spread is the residual.
    """
    x = np.asarray(list(x_star), dtype=float)
    s = len(x)
    if P < 1 or s % P != 0:
        raise ValueError(f"period {P} does not divide block length {s}")
    if s > P:
        shift_violation = float(np.max(np.abs(x[P:] - x[:-P])))
        if shift_violation > tol:
            raise ValueError(
                f"shift check fails: violation {shift_violation!r} exceeds "
                f"tol {tol!r}; not an accepted fixed point")

    period = P
    for p in _divisors(P)[:-1]:
        if float(np.max(np.abs(x[p:] - x[:-p]))) <= 10 * tol:
            period = p
            break
    values = tuple(float(np.mean(x[r::period])) for r in range(period))
    residual = max(
        abs(float(x[j]) - values[j % period]) for j in range(s))
    return PeriodicOrbit(period=period, phase_values=values, residual=residual)
