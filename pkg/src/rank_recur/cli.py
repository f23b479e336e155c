"""Command-line front end.

Five subcommands share one system-file format (see ``sysfile``):

* ``simulate``: iterate the recurrence, detect the asymptotic period,
  optionally write the trajectory as CSV.
* ``solve``: find the block-map fixed point, check that it commutes
  with the forcing shift, and report the periodic orbit.
* ``closed-form``: evaluate the matching explicit limit formula and
  compare it against the solver.
* ``verify``: run the randomized property suites.
* ``lipschitz``: per-map contraction certification table.

Exit codes are a stable contract::

    0  success
    1  a verification suite failed
    2  usage error or unreadable/invalid system file
    3  contraction not certified and --force not given
    4  numeric domain error (invalid operand during evaluation)
    5  no period detected / fixed-point iteration did not converge

Reports and CSV files start with a versioned header line and contain
no timestamps, so identical invocations produce identical bytes.  The
environment variable ``RANK_RECUR_DEFAULT_TOL`` replaces the default
tolerance of any subcommand; an explicit ``--tol`` wins over both.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .block_map import (
    DEFAULT_SOLVE_TOL,
    BlockMap,
    CertificationError,
    NonConvergenceError,
    extract_periodic_orbit,
    shift_commutation_check,
    solve_fixed_point,
)
from .closed_form import (
    autonomous_rank_limit,
    period_two_case,
    period_two_max_orbit,
    power_period_two_limit,
    power_period_two_terms,
    scalar_fixed_point,
)
from .expr import NumericDomainError
from .orbits import orbit_distance
from .simulate import DEFAULT_DETECT_TOL, convergence_report, detect_period, iterate
from .systems import certify_block, certify_family
from .sysfile import SystemDefinition, SystemFileError, load_system_file
from .verify import SUITES, run_suites

__all__ = [
    "EXIT_OK", "EXIT_SUITE_FAILURE", "EXIT_USAGE", "EXIT_CERTIFICATION",
    "EXIT_NUMERIC", "EXIT_DETECTION", "RunConfig", "main",
]

EXIT_OK = 0
EXIT_SUITE_FAILURE = 1
EXIT_USAGE = 2
EXIT_CERTIFICATION = 3
EXIT_NUMERIC = 4
EXIT_DETECTION = 5

ENV_DEFAULT_TOL = "RANK_RECUR_DEFAULT_TOL"
REPORT_HEADER = "# rank-recur report v1"
CSV_HEADER = "# rank-recur trajectory v1"

DEFAULT_STEPS = 10_000


class UsageError(ValueError):
    """Bad flag combination or malformed flag value."""


class Refusal(RuntimeError):
    """Certification did not establish contraction and --force is absent."""


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: one subcommand plus its knobs."""

    subcommand: str
    system: str | None = None
    seed_values: tuple[float, ...] | None = None
    seeds: int | None = None
    steps: int = DEFAULT_STEPS
    tol: float | None = None
    p_max: int | None = None
    force: bool = False
    rng_seed: int = 0
    out: str | None = None
    suite: str | None = None


def _fmt(v: float) -> str:
    """Shortest decimal that round-trips; deterministic for reports."""
    return repr(float(v))


def _csv_fmt(v: float) -> str:
    return format(float(v), ".17g")


def _resolve_tol(cfg: RunConfig, fallback: float) -> float:
    if cfg.tol is not None:
        return cfg.tol
    env = os.environ.get(ENV_DEFAULT_TOL)
    if env is not None:
        try:
            value = float(env)
        except ValueError:
            raise UsageError(f"{ENV_DEFAULT_TOL}={env!r} is not a number")
        if not (math.isfinite(value) and value > 0):
            raise UsageError(f"{ENV_DEFAULT_TOL}={env!r} is not a positive number")
        return value
    return fallback


def _parse_seed_values(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"--seed-values expects comma-separated numbers, got {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"--seed-values entries must be finite, got {text!r}")
    return values


def _certification(sysdef: SystemDefinition, cfg: RunConfig):
    """Report lines plus the system to run, or raise :class:`Refusal`.

    Contraction must be affirmatively certified before any computation:
    an exact bound from construction, a sampled derivative bound below 1,
    or (for raw power systems) the exact bound of the log conjugate.
    Pair sampling of black-box block maps can only refute, so block-kind
    files always need --force.  --force skips the whole stage.
    """
    runnable = sysdef.runnable
    recorded = (sysdef.family.alpha_bound if sysdef.family is not None
                else sysdef.block.L_bound)
    lines = []
    if cfg.force:
        lines.append("certification: skipped (--force)")
        if recorded is not None:
            lines.append(f"recorded bound: {recorded.describe()}")
        return lines, runnable

    est = recorded
    if est is None and sysdef.kind == "power" and sysdef.transform == "raw":
        log_twin = sysdef.log_conjugate()
        assert log_twin is not None and log_twin.family is not None
        est = log_twin.family.alpha_bound
        assert est is not None
        lines.append(f"certification: bound {est.describe()} via log conjugate")
    elif est is None and sysdef.family is not None:
        fam, cert = certify_family(sysdef.family, domain=sysdef.domain)
        est = cert.bound
        runnable = (fam, sysdef.schedule)
        lines.append(f"certification: bound {est.describe()}")
    elif est is None:
        block, cert = certify_block(sysdef.block, domain=sysdef.domain,
                                    seed=cfg.rng_seed)
        est = cert.bound
        runnable = block
        lines.append(f"certification: bound {est.describe()}")
        lines.append("note: sampled bounds on block maps cannot certify contraction")
    else:
        lines.append(f"certification: bound {est.describe()}")

    if est.certifies_contraction:
        return lines, runnable
    raise Refusal(
        f"{sysdef.path}: contraction not certified "
        f"(bound {est.describe()}); pass --force to run anyway")


def _default_initial(sysdef: SystemDefinition, length: int) -> tuple[float, ...]:
    fill = 1.0 if sysdef.block.positive_domain else 0.0
    return (fill,) * length


def _system_lines(sysdef: SystemDefinition, cfg: RunConfig) -> list[str]:
    lines = [
        REPORT_HEADER,
        f"command: {cfg.subcommand}",
        f"system: {sysdef.path}",
    ]
    if sysdef.label:
        lines.append(f"label: {sysdef.label}")
    lines.append(f"kind: {sysdef.kind}")
    lines.append(f"M: {sysdef.M}")
    lines.append(f"P: {sysdef.P}")
    lines.append(f"rng seed: {cfg.rng_seed}")
    return lines


def _orbit_lines(orbit) -> list[str]:
    lines = [f"period: {orbit.period}"]
    if orbit.onset is not None:
        lines.append(f"onset: {orbit.onset}")
    lines.append(f"orbit residual: {_fmt(orbit.residual)}")
    for r, v in enumerate(orbit.phase_values):
        lines.append(f"orbit value, steps n with (n-1) mod {orbit.period} = {r}: {_fmt(v)}")
    return lines


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.system is None:
        raise UsageError("simulate requires --system FILE")
    sysdef = load_system_file(cfg.system)
    tol = _resolve_tol(cfg, DEFAULT_DETECT_TOL)
    p_max = cfg.p_max if cfg.p_max is not None else 4 * sysdef.P
    cert_lines, system = _certification(sysdef, cfg)

    initial = cfg.seed_values
    if initial is None:
        initial = _default_initial(sysdef, sysdef.M)
    elif len(initial) not in (sysdef.M, sysdef.M * sysdef.P):
        raise UsageError(
            f"--seed-values needs M={sysdef.M} or s={sysdef.M * sysdef.P} "
            f"entries, got {len(initial)}")

    traj = iterate(system, initial, cfg.steps)
    orbit = detect_period(traj, p_max=p_max, tol=tol)

    lines = _system_lines(sysdef, cfg)
    lines += cert_lines
    lines.append(f"steps: {cfg.steps}")
    lines.append(f"detection tol: {_fmt(tol)}")
    lines.append(f"p_max: {p_max}")
    lines.append("initial values: " + ",".join(_fmt(v) for v in initial))

    if cfg.seeds is not None and cfg.seeds >= 2:
        rng = np.random.default_rng(cfg.rng_seed)
        lo, hi = (0.5, 5.0) if sysdef.block.positive_domain else (-5.0, 5.0)
        extra = [tuple(float(v) for v in rng.uniform(lo, hi, len(initial)))
                 for _ in range(cfg.seeds - 1)]
        rep = convergence_report(system, [initial, *extra], cfg.steps,
                                 tol=tol, p_max=p_max)
        lines.append(f"seeds compared: {cfg.seeds}")
        lines.append(f"all seeds detected: {'yes' if rep.all_detected else 'no'}")
        lines.append(f"max inter-seed orbit distance: {_fmt(rep.max_distance)}")
        lines.append(f"geometric rate estimate: {_fmt(rep.rate)}")

    if orbit is None:
        lines.append(f"period: none found up to p_max={p_max}")
    else:
        lines += _orbit_lines(orbit)
    report = "".join(line + "\n" for line in lines)
    sys.stdout.write(report)

    if cfg.out is not None:
        P = sysdef.P
        rows = [CSV_HEADER, "n,x,phase"]
        rows += [f"{n},{_csv_fmt(traj.values[n - 1])},{1 + (n - 1) % P}"
                 for n in range(1, traj.N + 1)]
        with open(cfg.out, "w", newline="") as fh:
            fh.write("".join(r + "\n" for r in rows))

    return EXIT_OK if orbit is not None else EXIT_DETECTION


def cmd_solve(cfg: RunConfig) -> int:
    if cfg.system is None:
        raise UsageError("solve requires --system FILE")
    sysdef = load_system_file(cfg.system)
    tol = _resolve_tol(cfg, DEFAULT_SOLVE_TOL)
    cert_lines, _ = _certification(sysdef, cfg)

    F = BlockMap(sysdef.block)
    seed = cfg.seed_values
    if seed is not None and len(seed) != F.s:
        raise UsageError(
            f"--seed-values needs s={F.s} entries for solve, got {len(seed)}")
    result = solve_fixed_point(F, seed=seed, tol=tol, force=cfg.force)
    orbit_tol = 100.0 * tol  # residual after a tol-sized step can exceed tol
    shift = shift_commutation_check(F, result.x_star, tol=orbit_tol)

    lines = _system_lines(sysdef, cfg)
    lines += cert_lines
    lines.append(f"solve tol: {_fmt(tol)}")
    lines.append(f"block dimension s: {F.s}")
    lines.append(f"iterations: {result.iterations}")
    lines.append(f"fixed-point residual: {_fmt(result.residual)}")
    lines.append(
        f"contraction ratio estimate: {_fmt(result.contraction_ratio_estimate)}")
    lines.append(
        f"shift commutation: {'pass' if shift.passed else 'FAIL'} "
        f"(violation {_fmt(shift.max_violation)}, tol {_fmt(shift.tol)})")
    if not shift.passed:
        _emit("".join(line + "\n" for line in lines), cfg.out)
        sys.stderr.write("error: fixed point does not commute with the "
                         "forcing shift at this tolerance\n")
        return EXIT_DETECTION
    orbit = extract_periodic_orbit(result.x_star, sysdef.P, tol=orbit_tol)
    lines += _orbit_lines(orbit)
    _emit("".join(line + "\n" for line in lines), cfg.out)
    return EXIT_OK


def _closed_form_autonomous(sysdef: SystemDefinition, cfg: RunConfig,
                            lines: list[str]) -> None:
    fam = sysdef.family
    assert fam is not None and sysdef.schedule is not None
    k = sysdef.schedule.ks[0]
    fs = [fam.f[i][0] for i in range(fam.M)]
    lines.append("shape: autonomous rank limit")
    lines.append(f"k: {k}")
    rs = [scalar_fixed_point(f) for f in fs]
    for i, r in enumerate(rs):
        lines.append(f"fixed point of lag-{i + 1} map: {_fmt(r)}")
    value = autonomous_rank_limit(fs, k)
    lines.append(f"formula limit: {_fmt(value)}")
    result = solve_fixed_point(BlockMap(sysdef.block), force=cfg.force)
    solved = extract_periodic_orbit(result.x_star, sysdef.P, tol=1e-10)
    lines.append(f"solver limit: {_fmt(solved.phase_values[0])}")
    lines.append(
        f"discrepancy: {_fmt(abs(value - solved.phase_values[0]))}")


def _closed_form_p2max(sysdef: SystemDefinition, cfg: RunConfig,
                       lines: list[str]) -> None:
    fam = sysdef.family
    assert fam is not None
    # even steps have phase 2, odd steps phase 1
    f1, f2 = fam.f[0][1], fam.f[1][1]
    g1, g2 = fam.f[0][0], fam.f[1][0]
    lines.append("shape: alternating max, M = P = 2")
    orbit = period_two_max_orbit(f1, f2, g1, g2)
    case = period_two_case(f1, f2, g1, g2)
    r = case["fixed_points"].r
    for name, value in zip(("r1", "r2", "r3", "r4"), r):
        lines.append(f"{name}: {_fmt(value)}")
    lines.append(f"even limit branch: {case['even_branch']}"
                 f" (inner argmax {case['even_inner_argmax']})")
    lines.append(f"odd limit branch: {case['odd_branch']}"
                 f" (inner argmax {case['odd_inner_argmax']})")
    if case["ties"]:
        lines.append("ties: " + ", ".join(sorted(case["ties"])))
    for r_idx, v in enumerate(orbit.phase_values):
        lines.append(
            f"formula value, steps n with (n-1) mod {orbit.period} = {r_idx}: {_fmt(v)}")
    result = solve_fixed_point(BlockMap(sysdef.block), force=cfg.force)
    solved = extract_periodic_orbit(result.x_star, 2, tol=1e-10)
    for r_idx, v in enumerate(solved.phase_values):
        lines.append(
            f"solver value, steps n with (n-1) mod {solved.period} = {r_idx}: {_fmt(v)}")
    lines.append(f"discrepancy: {_fmt(orbit_distance(orbit, solved))}")


def _closed_form_power(sysdef: SystemDefinition, cfg: RunConfig,
                       lines: list[str]) -> None:
    assert sysdef.power_A is not None and sysdef.power_alphas is not None
    A = sysdef.power_A
    a1, a2 = sysdef.power_alphas
    lines.append("shape: power-law max, M = P = 2")
    xe, xo = power_period_two_limit(A, a1, a2)
    lines.append(f"formula even-step limit: {_fmt(xe)}")
    lines.append(f"formula odd-step limit: {_fmt(xo)}")
    if a1 >= 0:
        te, to = power_period_two_terms(A, a1, a2)
        lines.append("even-step candidate terms: "
                     + ", ".join(_fmt(t) for t in te))
        lines.append("odd-step candidate terms: "
                     + ", ".join(_fmt(t) for t in to))
    else:
        lines.append("candidate terms: not available for alpha1 < 0")
    log_twin = sysdef.log_conjugate()
    assert log_twin is not None
    result = solve_fixed_point(BlockMap(log_twin.block), force=cfg.force)
    solved = extract_periodic_orbit(result.x_star, 2, tol=1e-10)
    se = math.exp(solved.value_at(2))
    so = math.exp(solved.value_at(1))
    lines.append(f"solver even-step limit: {_fmt(se)}")
    lines.append(f"solver odd-step limit: {_fmt(so)}")
    rel = max(abs(xe - se) / abs(se), abs(xo - so) / abs(so))
    lines.append(f"relative discrepancy: {_fmt(rel)}")


def cmd_closed_form(cfg: RunConfig) -> int:
    if cfg.system is None:
        raise UsageError("closed-form requires --system FILE")
    sysdef = load_system_file(cfg.system)
    lines = _system_lines(sysdef, cfg)
    cert_lines, _ = _certification(sysdef, cfg)
    lines += cert_lines
    if sysdef.kind == "power" and sysdef.M == 2 and sysdef.P == 2:
        _closed_form_power(sysdef, cfg, lines)
    elif sysdef.P == 1 and sysdef.family is not None:
        _closed_form_autonomous(sysdef, cfg, lines)
    elif (sysdef.M == 2 and sysdef.P == 2 and sysdef.family is not None
          and sysdef.schedule is not None and sysdef.schedule.ks == (1, 1)):
        _closed_form_p2max(sysdef, cfg, lines)
    else:
        raise UsageError(
            f"{sysdef.path}: no closed form for this shape "
            f"(supported: P=1 rank limits, M=P=2 max systems, "
            f"M=P=2 power-law systems)")
    _emit("".join(line + "\n" for line in lines), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    names = None
    if cfg.suite is not None:
        names = [tok.strip() for tok in cfg.suite.split(",") if tok.strip()]
        unknown = [n for n in names if n not in SUITES]
        if unknown:
            raise UsageError(
                f"unknown suite(s) {', '.join(unknown)}; "
                f"available: {', '.join(SUITES)}")
        if not names:
            raise UsageError("--suite must name at least one suite")
    tol = cfg.tol
    if tol is None and os.environ.get(ENV_DEFAULT_TOL) is not None:
        tol = _resolve_tol(cfg, DEFAULT_DETECT_TOL)
    results = run_suites(names, seed=cfg.rng_seed, tol=tol)

    lines = [REPORT_HEADER, "command: verify", f"rng seed: {cfg.rng_seed}"]
    lines.append("tol: per-suite defaults" if tol is None else f"tol: {_fmt(tol)}")
    for r in results:
        lines.append(r.summary_line())
        for d in r.details:
            lines.append(f"    {d}")
    failed = [r for r in results if not r.passed]
    if failed:
        lines.append(f"result: {len(failed)} of {len(results)} suite(s) FAILED")
    else:
        lines.append(f"result: all {len(results)} suite(s) passed")
    _emit("".join(line + "\n" for line in lines), cfg.out)
    return EXIT_SUITE_FAILURE if failed else EXIT_OK


def cmd_lipschitz(cfg: RunConfig) -> int:
    if cfg.system is None:
        raise UsageError("lipschitz requires --system FILE")
    sysdef = load_system_file(cfg.system)
    lines = _system_lines(sysdef, cfg)
    lines.append(f"domain: [{_fmt(sysdef.domain.lo)}, {_fmt(sysdef.domain.hi)}]")

    target = sysdef
    if sysdef.family is not None and sysdef.family.positive_domain:
        twin = sysdef.log_conjugate()
        assert twin is not None
        target = twin
        lines.append("note: power maps analysed in log coordinates")

    if target.family is not None:
        _, cert = certify_family(target.family, domain=target.domain)
    else:
        _, cert = certify_block(target.block, domain=target.domain,
                                seed=cfg.rng_seed)
        lines.append("note: sampled bounds on block maps cannot certify contraction")
    for row in cert.rows:
        lines.append(f"  {row.label}: {row.estimate.describe()}")
    lines.append(f"system bound: {cert.bound.describe()}")
    if cert.flagged:
        lines.append("verdict: FLAGGED, bound at or above 1")
    elif cert.certified:
        lines.append("verdict: certified contraction")
    else:
        lines.append("verdict: not certified (sampling can only refute)")
    _emit("".join(line + "\n" for line in lines), cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rank-recur",
        description="Simulate and analyse periodically forced rank-type "
                    "difference equations.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser, system: bool = True) -> None:
        if system:
            p.add_argument("--system", metavar="FILE", required=True,
                           help="system definition file (TOML)")
        p.add_argument("--tol", type=float, metavar="T",
                       help="override the subcommand's default tolerance")
        p.add_argument("--rng-seed", type=int, default=0, metavar="S",
                       help="seed for any random sampling (default 0)")
        p.add_argument("--out", metavar="PATH",
                       help="also write the output to this file")

    p = sub.add_parser("simulate", help="iterate and detect the asymptotic period")
    add_common(p)
    p.add_argument("--seed-values", metavar="V1,...",
                   help="initial values (M or s comma-separated numbers)")
    p.add_argument("--seeds", type=int, metavar="COUNT",
                   help="compare this many independent initial conditions")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS, metavar="N",
                   help=f"trajectory length (default {DEFAULT_STEPS})")
    p.add_argument("--pmax", type=int, metavar="K",
                   help="largest period to try (default 4*P)")
    p.add_argument("--force", action="store_true",
                   help="run without certified contraction")

    p = sub.add_parser("solve", help="fixed point of the block map")
    add_common(p)
    p.add_argument("--seed-values", metavar="V1,...",
                   help="starting block (s comma-separated numbers)")
    p.add_argument("--force", action="store_true",
                   help="iterate without certified contraction")

    p = sub.add_parser("closed-form", help="explicit limit vs solver")
    add_common(p)
    p.add_argument("--force", action="store_true",
                   help="evaluate without certified contraction")

    p = sub.add_parser("verify", help="run the property suites")
    add_common(p, system=False)
    p.add_argument("--suite", metavar="NAME[,NAME...]",
                   help="run only the named suites (default: all)")

    p = sub.add_parser("lipschitz", help="contraction certification table")
    add_common(p)

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    seed_values = None
    raw = getattr(args, "seed_values", None)
    if raw is not None:
        seed_values = _parse_seed_values(raw)
    seeds = getattr(args, "seeds", None)
    if seeds is not None and seeds < 2:
        raise UsageError(f"--seeds must be at least 2, got {seeds}")
    steps = getattr(args, "steps", DEFAULT_STEPS)
    if steps < 1:
        raise UsageError(f"--steps must be positive, got {steps}")
    p_max = getattr(args, "pmax", None)
    if p_max is not None and p_max < 1:
        raise UsageError(f"--pmax must be positive, got {p_max}")
    tol = getattr(args, "tol", None)
    if tol is not None and not (math.isfinite(tol) and tol > 0):
        raise UsageError(f"--tol must be a positive number, got {tol}")
    return RunConfig(
        subcommand=args.subcommand,
        system=getattr(args, "system", None),
        seed_values=seed_values,
        seeds=seeds,
        steps=steps,
        tol=tol,
        p_max=p_max,
        force=getattr(args, "force", False),
        rng_seed=args.rng_seed if getattr(args, "rng_seed", None) is not None else 0,
        out=getattr(args, "out", None),
        suite=getattr(args, "suite", None),
    )


_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "closed-form": cmd_closed_form,
    "verify": cmd_verify,
    "lipschitz": cmd_lipschitz,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = _config_from(args)
        return _COMMANDS[cfg.subcommand](cfg)
    except (UsageError, SystemFileError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (Refusal, CertificationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CERTIFICATION
    except NumericDomainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except NonConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DETECTION


if __name__ == "__main__":
    raise SystemExit(main())
