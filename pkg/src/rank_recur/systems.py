"""Executable representations of forced rank-type recurrences.

A :class:`ScalarFamily` stores the per-lag, per-phase update maps
f_i(x, n) of the recurrence

    x_n = k-rank{ f_1(x_{n-1}, n), ..., f_M(x_{n-M}, n) }

with the phase convention fixed once for every module: step n runs at
phase 1 + ((n-1) mod P), so steps 1..P cover the phases in order.  The
time dependence is resolved at construction: each grid entry is an
expression in ``x`` alone, already specialised to its phase.

A :class:`BlockSystem` is the general form x_n = G_phase(x_{n-1}, ...,
x_{n-M}) with arbitrary block expressions; :func:`rank_family_to_block`
composes a family and a rank schedule into one.  Builders for the
concrete families (affine matrix coefficients, positive power laws, the
cycling max-minus-rank example) attach exact Lipschitz figures whenever
the entries are affine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .expr import (
    Bin,
    BlockExpr,
    Call,
    Node,
    Num,
    Rank,
    ScalarExpr,
    Var,
    free_vars,
    parse_scalar,
    substitute,
)
from .lipschitz import (
    DEFAULT_DOMAIN,
    DEFAULT_GRID_POINTS,
    DEFAULT_PAIRS,
    DEFAULT_SAFETY_FACTOR,
    DomainInterval,
    LipschitzEstimate,
    estimate_block_lipschitz,
    estimate_scalar_lipschitz,
    linear_coefficients,
)

__all__ = [
    "RankSchedule",
    "ScalarFamily",
    "BlockSystem",
    "InitialCondition",
    "Certification",
    "CertificationRow",
    "phase_index",
    "rank_family_to_block",
    "affine_matrix_system",
    "power_max_system",
    "family_from_grid",
    "max_minus_rank_system",
    "certify_family",
    "certify_block",
]


def phase_index(n: int, P: int) -> int:
    """0-based phase of step n: (n-1) mod P.  Step 1 is phase 0."""
    return (n - 1) % P


@dataclass(frozen=True)
class RankSchedule:
    """Per-phase rank indices (k_1, ..., k_P), 1-based values."""

    ks: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.ks:
            raise ValueError("schedule must have at least one phase")
        for k in self.ks:
            if not isinstance(k, int) or k < 1:
                raise ValueError(f"rank index must be a positive integer, got {k!r}")

    @property
    def P(self) -> int:
        return len(self.ks)

    @classmethod
    def constant(cls, k: int, P: int) -> "RankSchedule":
        return cls((k,) * P)


def _check_entry(expr: ScalarExpr, where: str) -> None:
    extra = free_vars(expr.ast) - {"x"}
    if extra:
        raise ValueError(
            f"{where} must be a map of 'x' alone after phase specialisation, "
            f"found {sorted(extra)}")


@dataclass(frozen=True)
class ScalarFamily:
    """Grid of phase-specialised update maps, indexed [lag][phase], 0-based.

    ``f[i][p]`` is the map applied to x_{n-(i+1)} at steps with phase p.
    ``alpha_bound``, when present, dominates every entry's own Lipschitz
    figure.  ``positive_domain`` marks families defined only for x > 0.
    """

    M: int
    P: int
    f: tuple[tuple[ScalarExpr, ...], ...]
    alpha_bound: LipschitzEstimate | None = None
    positive_domain: bool = False

    def __post_init__(self) -> None:
        if self.M < 1 or self.P < 1:
            raise ValueError(f"M and P must be positive, got M={self.M}, P={self.P}")
        if len(self.f) != self.M:
            raise ValueError(f"grid has {len(self.f)} lag rows, expected {self.M}")
        for i, row in enumerate(self.f):
            if len(row) != self.P:
                raise ValueError(
                    f"lag {i + 1} has {len(row)} phase entries, expected {self.P}")
            for p, entry in enumerate(row):
                _check_entry(entry, f"entry (lag {i + 1}, phase {p + 1})")

    def entry(self, i: int, n: int) -> ScalarExpr:
        """Map for lag i (1-based) at step n."""
        return self.f[i - 1][phase_index(n, self.P)]

    @property
    def flagged(self) -> bool:
        """True when the recorded bound refutes contraction."""
        return self.alpha_bound is not None and self.alpha_bound.refutes_contraction


@dataclass(frozen=True)
class BlockSystem:
    """Recurrence x_n = G_phase(x_{n-1}, ..., x_{n-M}) with P phases."""

    M: int
    P: int
    G: tuple[BlockExpr, ...]
    L_bound: LipschitzEstimate | None = None
    positive_domain: bool = False

    def __post_init__(self) -> None:
        if self.M < 1 or self.P < 1:
            raise ValueError(f"M and P must be positive, got M={self.M}, P={self.P}")
        if len(self.G) != self.P:
            raise ValueError(f"expected {self.P} block maps, got {len(self.G)}")
        for p, g in enumerate(self.G):
            if g.arity != self.M:
                raise ValueError(
                    f"block map for phase {p + 1} has arity {g.arity}, expected {self.M}")

    @property
    def s(self) -> int:
        """Block dimension P*M."""
        return self.P * self.M

    def g_at(self, n: int) -> BlockExpr:
        return self.G[phase_index(n, self.P)]

    @property
    def flagged(self) -> bool:
        return self.L_bound is not None and self.L_bound.refutes_contraction


@dataclass(frozen=True)
class InitialCondition:
    """Seed values (x_1, ..., x_L); L is M, or P*M when seeding a block."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("initial condition must not be empty")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite initial value {v!r}")

    @classmethod
    def of(cls, values: "InitialCondition | Sequence[float]") -> "InitialCondition":
        if isinstance(values, InitialCondition):
            return values
        return cls(tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# Composition


def rank_family_to_block(fam: ScalarFamily, sched: RankSchedule) -> BlockSystem:
    """Compose a family and a schedule into G_p(y) = k_p-rank{f_i(y_i)}.

    Rank selection is sup-non-expansive, so the composed maps inherit the
    family's contraction figure unchanged.
    """
    if sched.P != fam.P:
        raise ValueError(f"schedule has {sched.P} phases, family has {fam.P}")
    for k in sched.ks:
        if k > fam.M:
            raise ValueError(f"rank index {k} exceeds memory length {fam.M}")
    gs = []
    for p in range(fam.P):
        args = tuple(
            substitute(fam.f[i][p].ast, {"x": Var(f"y{i + 1}")})
            for i in range(fam.M))
        gs.append(BlockExpr(Rank(sched.ks[p], args), fam.M))
    return BlockSystem(fam.M, fam.P, tuple(gs), L_bound=fam.alpha_bound,
                       positive_domain=fam.positive_domain)


# ---------------------------------------------------------------------------
# Concrete families


def _affine_entry(a: float, b: float) -> ScalarExpr:
    ax: Node = Bin("*", Num(float(a)), Var("x"))
    if b == 0:
        return ScalarExpr(ax)
    if b < 0:
        return ScalarExpr(Bin("-", ax, Num(-float(b))))
    return ScalarExpr(Bin("+", ax, Num(float(b))))


def _exact_bound(value: float) -> LipschitzEstimate:
    return LipschitzEstimate(value, "analytic-affine", 0, 1.0, None)


def _matrix(rows: Sequence[Sequence[float]], name: str) -> tuple[tuple[float, ...], ...]:
    out = tuple(tuple(float(v) for v in row) for row in rows)
    if not out or not out[0]:
        raise ValueError(f"{name} must be a non-empty matrix")
    width = len(out[0])
    for row in out:
        if len(row) != width:
            raise ValueError(f"{name} has ragged rows")
        for v in row:
            if not math.isfinite(v):
                raise ValueError(f"non-finite entry {v!r} in {name}")
    return out


def affine_matrix_system(
    A: Sequence[Sequence[float]],
    B: Sequence[Sequence[float]],
    k: int,
) -> tuple[ScalarFamily, RankSchedule]:
    """Family f_i(x, n) = A[phase][i]*x + B[phase][i] with constant rank k.

    Rows cycle with the phase, columns index the lag.  The exact bound
    max|A| is recorded; a value at or above 1 flags the family but the
    construction succeeds, since the non-contractive counterexamples are
    legitimate study objects.
    """
    a = _matrix(A, "A")
    b = _matrix(B, "B")
    if len(a) != len(b) or len(a[0]) != len(b[0]):
        raise ValueError(
            f"A is {len(a)}x{len(a[0])} but B is {len(b)}x{len(b[0])}")
    P, M = len(a), len(a[0])
    if not 1 <= k <= M:
        raise ValueError(f"rank index {k} outside 1..{M}")
    grid = tuple(
        tuple(_affine_entry(a[p][i], b[p][i]) for p in range(P))
        for i in range(M))
    bound = _exact_bound(max(abs(v) for row in a for v in row))
    fam = ScalarFamily(M, P, grid, alpha_bound=bound)
    return fam, RankSchedule.constant(k, P)


def power_max_system(
    A: Sequence[Sequence[float]],
    alphas: Sequence[float],
    transform: str = "log",
) -> tuple[ScalarFamily, RankSchedule]:
    """Max-type power law x_n = max_i{ A[phase][i] * x_{n-i}^alpha_i }.

    ``transform="log"`` returns the conjugate affine family in y = ln x
    (an exact contraction with bound max|alpha|); ``transform="raw"``
    returns the literal power maps on x > 0, which carry no global bound.
    The rank schedule is constantly 1 (max).
    """
    a = _matrix(A, "A")
    P, M = len(a), len(a[0])
    al = tuple(float(v) for v in alphas)
    if len(al) != M:
        raise ValueError(f"{len(al)} exponents for {M} lags")
    for row in a:
        for v in row:
            if v <= 0.0:
                raise ValueError(f"coefficient {v!r} is not positive")
    for v in al:
        if not abs(v) < 1.0:
            raise ValueError(f"exponent {v!r} outside (-1, 1)")
    if transform not in ("log", "raw"):
        raise ValueError(f"transform must be 'log' or 'raw', got {transform!r}")

    sched = RankSchedule.constant(1, P)
    if transform == "log":
        grid = tuple(
            tuple(_affine_entry(al[i], math.log(a[p][i])) for p in range(P))
            for i in range(M))
        bound = _exact_bound(max(abs(v) for v in al))
        return ScalarFamily(M, P, grid, alpha_bound=bound), sched
    grid = tuple(
        tuple(
            ScalarExpr(Bin("*", Num(a[p][i]), Bin("^", Var("x"), Num(al[i]))))
            for p in range(P))
        for i in range(M))
    return ScalarFamily(M, P, grid, positive_domain=True), sched


def family_from_grid(
    entries: Sequence[Sequence[str]] | Sequence[str],
    M: int,
    P: int,
) -> ScalarFamily:
    """Build a family from expression strings.

    Either M rows of P phase-specific strings, or M strings that may use
    ``n`` and are replicated across phases.  In both shapes any ``n`` is
    replaced by the 1-based phase number of the column, so entries behave
    identically at steps n and n + P by construction.
    """
    if M < 1 or P < 1:
        raise ValueError(f"M and P must be positive, got M={M}, P={P}")
    rows = list(entries)
    if len(rows) != M:
        raise ValueError(f"{len(rows)} rows for memory length {M}")
    grid: list[tuple[ScalarExpr, ...]] = []
    for i, row in enumerate(rows):
        if isinstance(row, str):
            base = parse_scalar(row)
            grid.append(tuple(base.at_step(p + 1) for p in range(P)))
            continue
        cells = list(row)
        if len(cells) != P:
            raise ValueError(f"row {i + 1} has {len(cells)} entries, expected {P}")
        grid.append(tuple(parse_scalar(cell).at_step(p + 1)
                          for p, cell in enumerate(cells)))
    return ScalarFamily(M, P, tuple(grid))


def max_minus_rank_system(fs: Sequence[ScalarExpr], P: int) -> BlockSystem:
    """Cycled-rank combination x_n = (max{f_i(x_{n-i})} - k-rank{...})/2.

    The rank index cycles with the step: at phase p (1-based) it is
    1 + (p mod P), so a step-index convention counting phases from 0
    lands on the same maps.  Requires P <= M so every rank index stays
    within 1..M.  The averaging weights sum to 1 in absolute value, so
    the maps inherit the worst entry bound; it is recorded exactly when
    every entry is affine.
    """
    fs = tuple(fs)
    M = len(fs)
    if M < 1:
        raise ValueError("need at least one map")
    if not 1 <= P <= M:
        raise ValueError(
            f"period {P} must satisfy 1 <= P <= M={M} so the cycling rank "
            f"index stays within 1..M")
    for i, f in enumerate(fs):
        _check_entry(f, f"map {i + 1}")

    gs = []
    for p in range(1, P + 1):
        k = 1 + (p % P)
        args = tuple(substitute(fs[i].ast, {"x": Var(f"y{i + 1}")})
                     for i in range(M))
        max_part: Node = Call("max", args) if M >= 2 else args[0]
        body = Bin("*", Num(0.5), Bin("-", max_part, Rank(k, args)))
        gs.append(BlockExpr(body, M))

    slopes = [linear_coefficients(f.ast) for f in fs]
    bound = None
    if all(s is not None for s in slopes):
        bound = _exact_bound(max(abs(s[0]) for s in slopes))  # type: ignore[index]
    return BlockSystem(M, P, tuple(gs), L_bound=bound)


# ---------------------------------------------------------------------------
# Certification


@dataclass(frozen=True)
class CertificationRow:
    label: str
    estimate: LipschitzEstimate


@dataclass(frozen=True)
class Certification:
    """Per-map Lipschitz figures plus the dominating system bound."""

    rows: tuple[CertificationRow, ...]
    bound: LipschitzEstimate

    @property
    def flagged(self) -> bool:
        return self.bound.refutes_contraction

    @property
    def certified(self) -> bool:
        return self.bound.certifies_contraction


def _dominating(rows: Sequence[CertificationRow]) -> LipschitzEstimate:
    return max((r.estimate for r in rows), key=lambda e: e.bound)


def certify_family(
    fam: ScalarFamily,
    domain: DomainInterval | tuple[float, float] = DEFAULT_DOMAIN,
    grid_points: int = DEFAULT_GRID_POINTS,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> tuple[ScalarFamily, Certification]:
    """Estimate every entry's bound and record the maximum on the family."""
    rows = []
    for i in range(fam.M):
        for p in range(fam.P):
            est = estimate_scalar_lipschitz(
                fam.f[i][p], domain=domain, grid_points=grid_points,
                safety_factor=safety_factor)
            rows.append(CertificationRow(f"lag {i + 1}, phase {p + 1}", est))
    cert = Certification(tuple(rows), _dominating(rows))
    return replace(fam, alpha_bound=cert.bound), cert


def certify_block(
    system: BlockSystem,
    domain: DomainInterval | tuple[float, float] = DEFAULT_DOMAIN,
    pairs: int = DEFAULT_PAIRS,
    seed: int = 0,
) -> tuple[BlockSystem, Certification]:
    """Pair-sample every block map; refutes contraction, never proves it.

    When the system already carries a bound from construction it is kept;
    the sampled figures are still reported.
    """
    rows = []
    for p, g in enumerate(system.G):
        est = estimate_block_lipschitz(g, domain=domain, pairs=pairs,
                                       seed=seed + p)
        rows.append(CertificationRow(f"phase {p + 1}", est))
    cert = Certification(tuple(rows), _dominating(rows))
    if system.L_bound is None:
        return replace(system, L_bound=cert.bound), cert
    return system, cert
