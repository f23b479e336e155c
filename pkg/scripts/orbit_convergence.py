"""How fast trajectories forget their seed.

Runs a fan of random initial conditions through one system, detects the
common limit orbit, and prints the sup distance to that orbit at
log-spaced steps per seed.  The final table shows the inter-seed orbit
distances, which the contraction argument drives to zero.

Usage:
    python scripts/orbit_convergence.py docs/systems/median_p4.toml
    python scripts/orbit_convergence.py docs/systems/affine_p2.toml --seeds 6
"""

import argparse
from dataclasses import dataclass

import numpy as np

from rank_recur.simulate import convergence_report, iterate
from rank_recur.sysfile import load_system_file


@dataclass(frozen=True)
class FanConfig:
    system: str
    seeds: int = 4
    steps: int = 2_000
    rng_seed: int = 0


def checkpoint_steps(N: int, count: int = 10) -> list[int]:
    marks = np.unique(np.geomspace(1, N, count).astype(int))
    return [int(n) for n in marks]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("system", help="system definition file (TOML)")
    parser.add_argument("--seeds", type=int, default=4)
    parser.add_argument("--steps", type=int, default=2_000)
    parser.add_argument("--rng-seed", type=int, default=0)
    args = parser.parse_args(argv)
    cfg = FanConfig(args.system, args.seeds, args.steps, args.rng_seed)

    sysdef = load_system_file(cfg.system)
    rng = np.random.default_rng(cfg.rng_seed)
    lo, hi = (0.5, 5.0) if sysdef.block.positive_domain else (-5.0, 5.0)
    seeds = [tuple(float(v) for v in rng.uniform(lo, hi, sysdef.M))
             for _ in range(cfg.seeds)]

    label = sysdef.label or sysdef.path
    print(f"system: {label}  (M={sysdef.M}, P={sysdef.P})")
    report = convergence_report(sysdef.runnable, seeds, cfg.steps)
    if not report.all_detected:
        print("no common orbit detected; nothing to measure")
        return 1

    orbit = report.orbits[0]
    print(f"detected period: {orbit.period}")
    marks = checkpoint_steps(cfg.steps)
    print("\nsup distance to the limit orbit:")
    print("step".rjust(8) + "".join(f"  seed {i}".rjust(12)
                                    for i in range(cfg.seeds)))
    trajs = [iterate(sysdef.runnable, s, cfg.steps) for s in seeds]
    for n in marks:
        row = [f"{n:>8}"]
        for t, o in zip(trajs, report.orbits):
            d = abs(float(t.values[n - 1]) - o.value_at(n))
            row.append(f"{d:>12.3e}")
        print("".join(row))

    print(f"\nmax inter-seed orbit distance: {report.max_distance:.3e}")
    rate = report.rate
    if rate == rate:  # not nan
        print(f"fitted geometric rate: {rate:.4f}", end="")
        if report.alpha_bound is not None:
            print(f"  (certified bound {report.alpha_bound})")
        else:
            print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
