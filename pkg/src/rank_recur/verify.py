"""Randomized verification suites for the package's core claims.

Each suite draws its instances from a seeded generator, so a run is
reproducible from (suite name, seed) and repeated runs yield identical
reports.  Suites return a :class:`SuiteResult` instead of raising: the
CLI prints them as a table and the test suite asserts on them, both
through :func:`run_suites`.

The suites and their default tolerances:

* ``rank``: rank selection is sup-non-expansive; exact comparison.
* ``block``: block-map iteration reproduces direct simulation, 1e-13.
* ``periodic``: detected prime periods divide the forcing period and
  seeds agree, 1e-8.
* ``autonomous``: closed-form limit of autonomous rank systems, 1e-9.
* ``p2``: the alternating-max orbit formula against the block solver
  and simulation, 1e-9, and the impossible branch never occurs.
* ``power``: explicit power-law limits against the log-space solver,
  relative 1e-9, including the no-forcing degenerate case.
* ``counterexamples``: the period-3 and damped-tent systems are flagged
  and misbehave exactly as intended.
* ``maxminusrank``: the cycling-rank combination converges with period
  dividing P, 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .block_map import BlockMap, apply_block_map, extract_periodic_orbit, solve_fixed_point
from .closed_form import (
    autonomous_rank_limit,
    period_two_case,
    period_two_max_orbit,
    power_period_two_limit,
)
from .expr import parse_scalar
from .orbits import orbit_distance
from .rank_core import k_rank_many
from .simulate import detect_period, iterate
from .systems import (
    RankSchedule,
    affine_matrix_system,
    certify_family,
    family_from_grid,
    max_minus_rank_system,
    power_max_system,
    rank_family_to_block,
)

__all__ = ["SuiteResult", "SUITES", "SUITE_TOLS", "run_suites"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    checks: int
    failures: int
    details: tuple[str, ...]

    def summary_line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{self.name:16} {status}  checks={self.checks} failures={self.failures}"


def _result(name: str, checks: int, failures: list[str],
            details: list[str]) -> SuiteResult:
    return SuiteResult(name, not failures, checks, len(failures),
                       tuple(details + failures))


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, salt])


# ---------------------------------------------------------------------------


def suite_rank(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Sup-non-expansiveness of rank selection; comparison is exact.

    10^5 pairs across dimensions 1..10 and every k, half wide draws and
    half tight perturbations with injected ties.  ``tol`` is ignored:
    selection and sup distance involve only comparisons and single
    subtractions, so no slack is owed.
    """
    rng = _rng(seed, 1)
    failures: list[str] = []
    checks = 0
    worst = -math.inf
    per_dim = 10_000
    for dim in range(1, 11):
        x = rng.uniform(-100, 100, (per_dim, dim))
        y = np.where(rng.random((per_dim, dim)) < 0.5,
                     rng.uniform(-100, 100, (per_dim, dim)),
                     x + rng.uniform(-1e-6, 1e-6, (per_dim, dim)))
        dup = rng.random((per_dim, dim)) < 0.1  # exact ties across vectors
        y[dup] = x[dup]
        dist = np.max(np.abs(x - y), axis=1)
        for k in range(1, dim + 1):
            gap = np.abs(k_rank_many(x, k) - k_rank_many(y, k))
            checks += per_dim
            worst = max(worst, float(np.max(gap - dist)))
            bad = np.nonzero(gap > dist)[0]
            if bad.size:
                i = int(bad[0])
                failures.append(
                    f"violation at dim={dim} k={k}: x={x[i].tolist()} "
                    f"y={y[i].tolist()}")
    details = [f"largest |R_k(x)-R_k(y)| - ||x-y|| over all pairs: {worst!r}"]
    return _result("rank", checks, failures, details)


def _random_affine(rng: np.random.Generator, M: int, P: int,
                   amax: float = 0.9):
    A = rng.uniform(-amax, amax, (P, M))
    B = rng.uniform(-3, 3, (P, M))
    k = int(rng.integers(1, M + 1))
    return affine_matrix_system(A, B, k)


def suite_block(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Block-map entries match direct simulation over 50 block steps."""
    tol = 1e-13 if tol is None else tol
    rng = _rng(seed, 2)
    failures: list[str] = []
    worst = 0.0
    count = 50
    for trial in range(count):
        M = int(rng.integers(1, 5))
        P = int(rng.integers(1, 5))
        fam, sched = _random_affine(rng, M, P)
        system = rank_family_to_block(fam, sched)
        F = BlockMap(system)
        s = system.s
        y0 = rng.uniform(-5, 5, s)
        steps = 50
        traj = iterate(system, list(y0), s * (steps + 1))
        y = y0
        dev = 0.0
        for m in range(1, steps + 1):
            y = apply_block_map(F, y)
            dev = max(dev, float(np.max(np.abs(traj.values[s * m: s * (m + 1)] - y))))
        worst = max(worst, dev)
        if dev > tol:
            failures.append(f"trial {trial}: block/direct deviation {dev!r} "
                            f"(M={M}, P={P})")
    details = [f"worst deviation over {count} systems: {worst!r}"]
    return _result("block", count, failures, details)


def suite_periodic(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Random affine rank systems: prime period divides P, seeds agree."""
    tol = 1e-8 if tol is None else tol
    rng = _rng(seed, 3)
    failures: list[str] = []
    worst_dist = 0.0
    count = 200
    n_steps = 10_000
    for trial in range(count):
        M = int(rng.integers(1, 6))
        P = int(rng.integers(1, 7))
        fam, sched = _random_affine(rng, M, P)
        orbits = []
        bad = False
        for _ in range(2):
            traj = iterate((fam, sched), rng.uniform(-5, 5, M), n_steps)
            orbit = detect_period(traj, p_max=4 * P)
            if orbit is None:
                failures.append(f"trial {trial}: no period found (M={M}, P={P})")
                bad = True
                break
            if P % orbit.period != 0:
                failures.append(
                    f"trial {trial}: period {orbit.period} does not divide "
                    f"P={P}")
                bad = True
                break
            orbits.append(orbit)
        if bad:
            continue
        d = orbit_distance(orbits[0], orbits[1])
        worst_dist = max(worst_dist, d)
        if d > tol:
            failures.append(f"trial {trial}: seeds disagree by {d!r}")
    details = [f"worst inter-seed orbit distance over {count} systems: {worst_dist!r}"]
    return _result("periodic", count, failures, details)


def suite_autonomous(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Closed-form limit of autonomous rank systems vs simulation."""
    tol = 1e-9 if tol is None else tol
    rng = _rng(seed, 4)
    failures: list[str] = []
    worst = 0.0
    count = 100
    for trial in range(count):
        M = int(rng.integers(1, 7))
        entries = []
        for _ in range(M):
            b = rng.uniform(-3, 3)
            if rng.random() < 0.3:
                c = rng.uniform(-0.8, 0.8)
                entries.append(f"{c!r}*cos(x) + {b!r}")
            else:
                a = rng.uniform(-0.9, 0.9)
                entries.append(f"{a!r}*x + {b!r}")
        k = int(rng.integers(1, M + 1))
        fam = family_from_grid(entries, M, 1)
        fs = [fam.f[i][0] for i in range(M)]
        value = autonomous_rank_limit(fs, k)
        traj = iterate((fam, RankSchedule.constant(k, 1)),
                       rng.uniform(-5, 5, M), 4000)
        orbit = detect_period(traj, p_max=4)
        if orbit is None:
            failures.append(f"trial {trial}: no limit detected")
            continue
        gap = max(abs(v - value) for v in orbit.phase_values)
        worst = max(worst, gap)
        if gap > tol:
            failures.append(
                f"trial {trial}: closed form {value!r} vs simulated "
                f"{orbit.phase_values} (gap {gap!r})")
    details = [f"worst closed-form/simulation gap over {count} draws: {worst!r}"]
    return _result("autonomous", count, failures, details)


def _p2_family(slopes, intercepts):
    """Family for x_even = max{f1(x-1), f2(x-2)}, x_odd = max{g1, g2}.

    Even steps run at phase 2, odd steps at phase 1, so f1, f2 fill the
    second phase column and g1, g2 the first.
    """
    (af1, af2, ag1, ag2) = slopes
    (bf1, bf2, bg1, bg2) = intercepts
    A = [[ag1, ag2], [af1, af2]]
    B = [[bg1, bg2], [bf1, bf2]]
    return affine_matrix_system(A, B, 1)


def suite_p2(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Alternating-max orbit formula vs solver and simulation.

    Also scans for the branch combination the case analysis excludes
    (even limit from f1(r4) with f1(r4) > r3 while the odd limit comes
    from g1(r3) with g1(r3) > r4): it must never occur.
    """
    tol = 1e-9 if tol is None else tol
    rng = _rng(seed, 5)
    failures: list[str] = []
    worst = 0.0
    excluded_seen = 0
    count = 100
    for trial in range(count):
        slopes = [float(v) for v in rng.uniform(-0.9, 0.9, 4)]
        intercepts = [float(v) for v in rng.uniform(-3, 3, 4)]
        f1, f2, g1, g2 = (parse_scalar(f"{a!r}*x + {b!r}")
                          for a, b in zip(slopes, intercepts))
        formula = period_two_max_orbit(f1, f2, g1, g2)
        fam, sched = _p2_family(slopes, intercepts)
        res = solve_fixed_point(BlockMap(rank_family_to_block(fam, sched)))
        solved = extract_periodic_orbit(res.x_star, 2, tol=1e-10)
        traj = iterate((fam, sched), rng.uniform(-5, 5, 2), 10_000)
        sim = detect_period(traj, p_max=8)
        if sim is None:
            failures.append(f"trial {trial}: simulation found no orbit")
            continue
        gap = max(orbit_distance(formula, solved), orbit_distance(formula, sim))
        worst = max(worst, gap)
        if gap > tol:
            failures.append(f"trial {trial}: formula off by {gap!r}")
        case = period_two_case(f1, f2, g1, g2)
        r1, r2, r3, r4 = case["fixed_points"].r
        c1 = lambda x: slopes[0] * x + intercepts[0]
        c3 = lambda x: slopes[2] * x + intercepts[2]
        if (case["even_branch"] == "f1" and case["even_inner_argmax"] == "r4"
                and c1(r4) > r3
                and case["odd_branch"] == "g1"
                and case["odd_inner_argmax"] == "r3" and c3(r3) > r4):
            excluded_seen += 1
            failures.append(f"trial {trial}: excluded branch combination occurred")
    details = [
        f"worst formula/oracle gap over {count} quadruples: {worst!r}",
        f"excluded branch combinations observed: {excluded_seen}",
    ]
    return _result("p2", count, failures, details)


def suite_power(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Explicit power-law limits vs the log-space solver, relative."""
    tol = 1e-9 if tol is None else tol
    rng = _rng(seed, 6)
    failures: list[str] = []
    worst = 0.0
    count = 100
    for trial in range(count):
        A = np.exp(rng.uniform(-2, 2, (2, 2)))
        a1, a2 = rng.uniform(-0.9, 0.9, 2)
        xe, xo = power_period_two_limit(A, a1, a2)
        fam, sched = power_max_system(A, (a1, a2), "log")
        res = solve_fixed_point(BlockMap(rank_family_to_block(fam, sched)))
        orbit = extract_periodic_orbit(res.x_star, 2, tol=1e-10)
        se, so = math.exp(orbit.value_at(2)), math.exp(orbit.value_at(1))
        rel = max(abs(xe - se) / se, abs(xo - so) / so)
        worst = max(worst, rel)
        if rel > tol:
            failures.append(f"trial {trial}: relative gap {rel!r}")
    degenerate = 10
    for trial in range(degenerate):
        a_top, a_bot = np.exp(rng.uniform(-2, 2, 2))
        a1, a2 = rng.uniform(-0.9, 0.9, 2)
        xe, xo = power_period_two_limit([[a_top, a_bot], [a_top, a_bot]], a1, a2)
        want = max(a_top ** (1 / (1 - a1)), a_bot ** (1 / (1 - a2)))
        rel = max(abs(xe - want), abs(xo - want)) / want
        worst = max(worst, rel)
        if rel > tol:
            failures.append(
                f"degenerate trial {trial}: relative gap {rel!r}")
    details = [f"worst relative gap over {count}+{degenerate} draws: {worst!r}"]
    return _result("power", count + degenerate, failures, details)


def suite_counterexamples(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """The two deliberately misbehaving fixtures misbehave on cue.

    The period-3 system (x_n = max{-x_{n-1}, -x_{n-2}}, P = 1) detects
    period 3, which does not divide P.  The phase-damped tent map stays
    aperiodic out to p_max = 64 over 10^4 steps.  Certification flags
    both at bound >= 1.
    """
    failures: list[str] = []
    details: list[str] = []
    checks = 6

    fam3, sched3 = affine_matrix_system([[-1.0, -1.0]], [[0.0, 0.0]], 1)
    if not fam3.flagged:
        failures.append("period-3 system not flagged")
    traj = iterate((fam3, sched3), [1.0, 2.0], 400)
    orbit = detect_period(traj, p_max=4)
    if orbit is None or orbit.period != 3:
        failures.append(f"period-3 system detected {orbit and orbit.period}")
    else:
        details.append(
            f"period-3 system: period {orbit.period} with P=1, "
            f"values {orbit.phase_values}")

    tent = family_from_grid(
        [[f"{c}*max(1 - 2*x, 2*x - 1)" for c in (0.93, 0.88, 0.93, 0.98)]],
        1, 4)
    tent, cert = certify_family(tent, domain=(0.0, 1.0))
    if not cert.flagged:
        failures.append(f"damped tent not flagged: bound {cert.bound.bound!r}")
    else:
        details.append(f"damped tent bound: {cert.bound.bound!r}")
    traj = iterate((tent, RankSchedule.constant(1, 4)), [0.2], 10_000)
    found = detect_period(traj, p_max=64)
    if found is not None:
        failures.append(
            f"damped tent spuriously detected period {found.period}")
    else:
        details.append("damped tent: no period up to p_max=64")
    return _result("counterexamples", checks, failures, details)


def suite_maxminusrank(seed: int = 0, tol: float | None = None) -> SuiteResult:
    """Cycling-rank combinations: period divides P, solver matches sim."""
    tol = 1e-8 if tol is None else tol
    rng = _rng(seed, 8)
    failures: list[str] = []
    worst = 0.0
    count = 20
    for trial in range(count):
        M = int(rng.integers(2, 6))
        P = int(rng.integers(1, M + 1))
        fs = [parse_scalar(f"{rng.uniform(-0.9, 0.9)!r}*x + {rng.uniform(-3, 3)!r}")
              for _ in range(M)]
        system = max_minus_rank_system(fs, P)
        traj = iterate(system, rng.uniform(-5, 5, M), 6000)
        sim = detect_period(traj, p_max=4 * P)
        if sim is None:
            failures.append(f"trial {trial}: no period found (M={M}, P={P})")
            continue
        if P % sim.period != 0:
            failures.append(
                f"trial {trial}: period {sim.period} does not divide P={P}")
            continue
        res = solve_fixed_point(BlockMap(system))
        solved = extract_periodic_orbit(res.x_star, P, tol=1e-10)
        d = orbit_distance(sim, solved)
        worst = max(worst, d)
        if d > tol:
            failures.append(f"trial {trial}: solver and simulation differ by {d!r}")
    details = [f"worst solver/simulation distance over {count} draws: {worst!r}"]
    return _result("maxminusrank", count, failures, details)


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "rank": suite_rank,
    "block": suite_block,
    "periodic": suite_periodic,
    "autonomous": suite_autonomous,
    "p2": suite_p2,
    "power": suite_power,
    "counterexamples": suite_counterexamples,
    "maxminusrank": suite_maxminusrank,
}

SUITE_TOLS: dict[str, float | None] = {
    "rank": None,  # exact
    "block": 1e-13,
    "periodic": 1e-8,
    "autonomous": 1e-9,
    "p2": 1e-9,
    "power": 1e-9,
    "counterexamples": None,
    "maxminusrank": 1e-8,
}


def run_suites(names: Sequence[str] | None = None, seed: int = 0,
               tol: float | None = None) -> list[SuiteResult]:
    """Run the named suites (all by default) with one shared seed."""
    if names is None:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(
            f"unknown suites {unknown}; available: {list(SUITES)}")
    return [SUITES[n](seed=seed, tol=tol) for n in names]
