"""Direct trajectory iteration and asymptotic-period analysis.

Systems are either a (ScalarFamily, RankSchedule) pair, stepped as
x_n = k_phase-rank{f_i(x_{n-i})}, or a BlockSystem stepped through its
block expressions.  An initial condition of length M starts the
recurrence; one of length P*M warm-starts it from a whole block, which
makes trajectories directly comparable with block-map iteration.

Period detection scans the trajectory tail for the smallest shift that
maps it onto itself within tolerance.  Detected orbits are anchored to
the absolute step index so that orbits from different seeds, or from the
block-map solver, can be compared entry by entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .expr import NumericDomainError, compile_ast, eval_ast
from .orbits import PeriodicOrbit, orbit_distance, orbit_distance_min_rotation
from .systems import BlockSystem, InitialCondition, RankSchedule, ScalarFamily

__all__ = [
    "System",
    "Trajectory",
    "TrajectoryError",
    "ConvergenceReport",
    "iterate",
    "detect_period",
    "convergence_report",
    "DEFAULT_DETECT_TOL",
    "DEFAULT_TAIL_FRACTION",
]

System = Union[BlockSystem, tuple[ScalarFamily, RankSchedule]]

DEFAULT_DETECT_TOL = 1e-9
DEFAULT_TAIL_FRACTION = 0.25

_RATE_POINTS = 50
_RATE_FLOOR = 100 * np.finfo(float).eps


class TrajectoryError(NumericDomainError):
    """Numeric-domain failure during iteration.

    ``step`` is the 1-based step that failed and ``partial`` holds the
    values produced before it.
    """

    def __init__(self, step: int, partial: np.ndarray, cause: NumericDomainError):
        self.step = step
        self.partial = partial
        NumericDomainError.__init__(self, f"step {step}: {cause}")
        self.node = cause.node
        self.env = cause.env


def _dims(system: System) -> tuple[int, int]:
    if isinstance(system, BlockSystem):
        return system.M, system.P
    fam, sched = system
    if sched.P != fam.P:
        raise ValueError(f"schedule has {sched.P} phases, family has {fam.P}")
    return fam.M, fam.P


def system_bound(system: System) -> float | None:
    """The recorded contraction figure, if any."""
    est = system.L_bound if isinstance(system, BlockSystem) else system[0].alpha_bound
    return est.bound if est is not None else None


def system_flagged(system: System) -> bool:
    return (system.flagged if isinstance(system, BlockSystem)
            else system[0].flagged)


@dataclass(frozen=True)
class Trajectory:
    """Values x_1 .. x_N; the first len(initial) entries are the seed."""

    values: np.ndarray
    system: System
    initial: InitialCondition

    @property
    def N(self) -> int:
        return len(self.values)

    def phase_of(self, n: int) -> int:
        """1-based phase of step n."""
        _, P = _dims(self.system)
        return 1 + (n - 1) % P


def iterate(system: System, init: "InitialCondition | Sequence[float]",
            N: int) -> Trajectory:
    """Run the recurrence out to x_N.

    ``init`` supplies x_1 onwards; iteration starts after it.  A domain
    failure at step n raises :class:`TrajectoryError` carrying n and the
    values produced so far.
    """
    M, P = _dims(system)
    init = InitialCondition.of(init)
    s = P * M
    if len(init) not in (M, s):
        raise ValueError(
            f"initial condition must have length M={M} or s={s}, "
            f"got {len(init)}")
    if N < len(init):
        raise ValueError(f"N={N} is shorter than the initial condition")

    values = list(init.values)
    if isinstance(system, BlockSystem):
        gs = [(g.compiled(), g.ast, g.params) for g in system.G]
        for n in range(len(values) + 1, N + 1):
            compiled, ast, params = gs[(n - 1) % P]
            args = tuple(values[-1 - j] for j in range(M))
            try:
                x = compiled(*args)
            except ArithmeticError:
                _raise_step_error(n, values, ast, params, args)
            if not math.isfinite(x):
                _raise_step_error(n, values, ast, params, args)
            values.append(x)
        return Trajectory(np.array(values), system, init)

    fam, sched = system
    comp = [[compile_ast(fam.f[i][p].ast, ("x",)) for i in range(M)]
            for p in range(P)]
    ks = sched.ks
    for k in ks:
        if k > M:
            raise ValueError(f"rank index {k} exceeds memory length {M}")
    for n in range(len(values) + 1, N + 1):
        p = (n - 1) % P
        fs = comp[p]
        try:
            vals = [fs[i](values[-1 - i]) for i in range(M)]
        except ArithmeticError:
            _raise_family_step_error(n, values, fam, p)
        for v in vals:
            if not math.isfinite(v):
                _raise_family_step_error(n, values, fam, p)
        values.append(sorted(vals)[M - ks[p]])
    return Trajectory(np.array(values), system, init)


def _raise_step_error(n, values, ast, params, args):
    try:
        eval_ast(ast, dict(zip(params, args)))
        cause = NumericDomainError("non-finite result", ast)
    except NumericDomainError as exc:
        cause = exc
    raise TrajectoryError(n, np.array(values), cause) from None


def _raise_family_step_error(n, values, fam, p):
    for i in range(M := fam.M):
        x_arg = values[-1 - i]
        try:
            out = eval_ast(fam.f[i][p].ast, {"x": x_arg})
            if not math.isfinite(out):
                raise NumericDomainError("non-finite result", fam.f[i][p].ast,
                                         {"x": x_arg})
        except NumericDomainError as exc:
            cause = NumericDomainError(
                f"lag {i + 1}, phase {p + 1}: {exc}")
            cause.node = exc.node
            cause.env = exc.env
            raise TrajectoryError(n, np.array(values), cause) from None
    raise TrajectoryError(
        n, np.array(values),
        NumericDomainError(f"undiagnosed failure at phase {p + 1}"))


def detect_period(
    t: Trajectory,
    p_max: int,
    tol: float = DEFAULT_DETECT_TOL,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> PeriodicOrbit | None:
    """Smallest period visible in the trajectory tail, or None.

    The tail is the last ``tail_fraction`` of the run and must be at
    least twice ``p_max`` long.  A period p qualifies when every
    |x_{n+p} - x_n| over tail pairs stays within ``tol``; phase values
    are read from the final p entries, anchored to the absolute index,
    and onset is the earliest step from which the whole remaining
    trajectory is p-periodic at ``tol``.
    """
    if p_max < 1:
        raise ValueError(f"p_max must be positive, got {p_max}")
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    arr = t.values
    N = len(arr)
    tail_len = math.ceil(tail_fraction * N)
    if tail_len < 2 * p_max:
        raise ValueError(
            f"tail of {tail_len} points cannot support p_max={p_max}; "
            f"need at least {2 * p_max}")
    lo = N - tail_len  # 0-based start of the tail window
    for p in range(1, p_max + 1):
        diffs = np.abs(arr[lo + p:] - arr[lo:N - p])
        if diffs.size and float(np.max(diffs)) <= tol:
            residual = float(np.max(diffs))
            all_diffs = np.abs(arr[p:] - arr[:N - p])
            bad = np.nonzero(all_diffs > tol)[0]
            onset = int(bad[-1]) + 2 if bad.size else 1
            values = [0.0] * p
            for m in range(N - p + 1, N + 1):  # final p entries, 1-based
                values[(m - 1) % p] = float(arr[m - 1])
            return PeriodicOrbit(period=p, phase_values=tuple(values),
                                 residual=residual, onset=onset)
    return None


@dataclass(frozen=True)
class ConvergenceReport:
    """Multi-seed independence summary.

    Matrices hold sup distances between detected orbits, nan where a
    seed failed detection: ``distance_matrix`` compares at matching
    absolute phase (what the contraction argument guarantees),
    ``free_rotation_matrix`` over the best cyclic shift (diagnostic
    only).  ``rates`` are per-seed
    geometric convergence estimates fitted before the detected onset.
    """

    seeds: tuple[InitialCondition, ...]
    orbits: tuple[PeriodicOrbit | None, ...]
    distance_matrix: np.ndarray
    free_rotation_matrix: np.ndarray
    rates: tuple[float, ...]
    alpha_bound: float | None

    @property
    def all_detected(self) -> bool:
        return all(o is not None for o in self.orbits)

    @property
    def max_distance(self) -> float:
        off = self.distance_matrix[~np.eye(len(self.seeds), dtype=bool)]
        finite = off[np.isfinite(off)]
        return float(np.max(finite)) if finite.size else math.nan

    @property
    def rate(self) -> float:
        finite = [r for r in self.rates if math.isfinite(r)]
        return max(finite) if finite else math.nan


def _fit_rate(traj: Trajectory, orbit: PeriodicOrbit) -> float:
    """Geometric rate from log-distance regression before the onset."""
    if orbit.onset is None or orbit.onset <= 1:
        return math.nan
    end = min(orbit.onset - 1, traj.N)
    dists = np.array([abs(float(traj.values[n - 1]) - orbit.value_at(n))
                      for n in range(1, end + 1)])
    keep = np.nonzero(dists > _RATE_FLOOR)[0]
    if keep.size < 2:
        return math.nan
    keep = keep[-_RATE_POINTS:]
    ns = keep + 1.0
    logs = np.log(dists[keep])
    slope = np.polyfit(ns, logs, 1)[0]
    return float(math.exp(slope))


def convergence_report(
    system: System,
    seeds: Sequence["InitialCondition | Sequence[float]"],
    N: int,
    tol: float = DEFAULT_DETECT_TOL,
    p_max: int | None = None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> ConvergenceReport:
    """Iterate every seed, detect orbits, and cross-compare them."""
    if len(seeds) < 2:
        raise ValueError("need at least two seeds to compare")
    _, P = _dims(system)
    if p_max is None:
        p_max = 4 * P
    ics = tuple(InitialCondition.of(s) for s in seeds)
    trajs = [iterate(system, ic, N) for ic in ics]
    orbits = tuple(detect_period(t, p_max, tol, tail_fraction) for t in trajs)

    k = len(ics)
    dist = np.full((k, k), math.nan)
    free = np.full((k, k), math.nan)
    for i in range(k):
        for j in range(k):
            if orbits[i] is not None and orbits[j] is not None:
                dist[i, j] = orbit_distance(orbits[i], orbits[j])
                free[i, j] = orbit_distance_min_rotation(orbits[i], orbits[j])
    rates = tuple(
        _fit_rate(t, o) if o is not None else math.nan
        for t, o in zip(trajs, orbits))
    return ConvergenceReport(
        seeds=ics, orbits=orbits, distance_matrix=dist,
        free_rotation_matrix=free, rates=rates,
        alpha_bound=system_bound(system))
