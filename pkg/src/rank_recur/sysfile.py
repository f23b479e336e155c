"""System definition files.

One TOML schema serves every subcommand.  Required keys: ``kind`` (one
of ``affine``, ``power``, ``grid``, ``block``), ``M``, ``P``.  Rank
selection for the first three kinds comes from exactly one of ``k``
(constant) or ``schedule`` (one index per phase); ``block`` systems
encode their selection inside the expressions and take neither.

Kind-specific payload:

* ``affine``: matrices ``A`` and ``B``, each P rows of M numbers; row p
  applies at phase p, column i at lag i.
* ``power``: positive matrix ``A`` (same layout), ``alphas`` (M
  exponents in (-1, 1)), optional ``transform`` = ``"log"`` (default)
  or ``"raw"``.
* ``grid``: ``f`` as M rows of P expression strings over ``x`` (one per
  phase), or M strings over ``x`` and ``n`` that are specialised per
  phase by substituting the phase number for ``n``.
* ``block``: ``G`` as P expression strings over ``y1`` .. ``yM``.

Optional keys: ``domain`` ([lo, hi] certification window, default
[-10, 10]), ``label``.  Worked examples live in docs/systems/.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from .expr import ExprError, parse_block
from .lipschitz import DEFAULT_DOMAIN, DomainInterval
from .systems import (
    BlockSystem,
    RankSchedule,
    ScalarFamily,
    affine_matrix_system,
    family_from_grid,
    power_max_system,
    rank_family_to_block,
)

__all__ = ["SystemFileError", "SystemDefinition", "load_system_file"]

_KINDS = ("affine", "power", "grid", "block")
_COMMON_KEYS = {"kind", "M", "P", "k", "schedule", "domain", "label"}
_KIND_KEYS = {
    "affine": {"A", "B"},
    "power": {"A", "alphas", "transform"},
    "grid": {"f"},
    "block": {"G"},
}


class SystemFileError(ValueError):
    """A system definition file that cannot be used."""

    def __init__(self, path: "str | Path", message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


@dataclass(frozen=True)
class SystemDefinition:
    """A loaded system: the composed block form plus family metadata.

    ``family`` and ``schedule`` are present for every kind except
    ``block``.  For ``power`` systems the construction parameters are
    kept so the log conjugate can be built regardless of ``transform``.
    """

    kind: str
    M: int
    P: int
    block: BlockSystem
    family: ScalarFamily | None
    schedule: RankSchedule | None
    domain: DomainInterval
    label: str | None
    path: str
    transform: str | None = None
    power_A: tuple[tuple[float, ...], ...] | None = None
    power_alphas: tuple[float, ...] | None = None

    @property
    def runnable(self):
        """The fastest equivalent representation for iteration."""
        if self.family is not None and self.schedule is not None:
            return (self.family, self.schedule)
        return self.block

    def log_conjugate(self) -> "SystemDefinition | None":
        """For power systems, the same system in y = ln x coordinates."""
        if self.kind != "power":
            return None
        if self.transform == "log":
            return self
        assert self.power_A is not None and self.power_alphas is not None
        fam, sched = power_max_system(self.power_A, self.power_alphas, "log")
        return SystemDefinition(
            kind="power", M=self.M, P=self.P,
            block=rank_family_to_block(fam, sched),
            family=fam, schedule=sched, domain=self.domain,
            label=self.label, path=self.path, transform="log",
            power_A=self.power_A, power_alphas=self.power_alphas)


def _require(table: dict, key: str, path, kind=None) -> object:
    if key not in table:
        where = f" for kind {kind!r}" if kind else ""
        raise SystemFileError(path, f"missing required key {key!r}{where}")
    return table[key]


def _as_int(value: object, key: str, path) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SystemFileError(path, f"{key!r} must be an integer, got {value!r}")
    return value


def _as_matrix(value: object, key: str, path, rows: int, cols: int) -> list[list[float]]:
    if not isinstance(value, list) or len(value) != rows:
        raise SystemFileError(
            path, f"{key!r} must be a list of {rows} rows (one per phase)")
    out = []
    for p, row in enumerate(value):
        if not isinstance(row, list) or len(row) != cols:
            raise SystemFileError(
                path, f"{key!r} row {p + 1} must have {cols} entries (one per lag)")
        vals = []
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)) \
                    or not math.isfinite(float(v)):
                raise SystemFileError(
                    path, f"{key!r} row {p + 1} has a non-numeric entry {v!r}")
            vals.append(float(v))
        out.append(vals)
    return out


def load_system_file(path: "str | Path") -> SystemDefinition:
    """Parse and build a system definition; see the module docstring."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SystemFileError(path, f"cannot read file: {exc}") from None
    try:
        table = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise SystemFileError(path, f"not valid TOML: {exc}") from None

    kind = _require(table, "kind", path)
    if kind not in _KINDS:
        raise SystemFileError(path, f"kind must be one of {_KINDS}, got {kind!r}")
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    unknown = set(table) - allowed
    if unknown:
        raise SystemFileError(
            path, f"unknown keys for kind {kind!r}: {sorted(unknown)}")

    M = _as_int(_require(table, "M", path), "M", path)
    P = _as_int(_require(table, "P", path), "P", path)
    if M < 1 or P < 1:
        raise SystemFileError(path, f"M and P must be positive, got M={M}, P={P}")

    schedule = _load_schedule(table, path, kind, M, P)
    domain = _load_domain(table, path)
    label = table.get("label")
    if label is not None and not isinstance(label, str):
        raise SystemFileError(path, f"label must be a string, got {label!r}")

    try:
        if kind == "affine":
            a = _as_matrix(_require(table, "A", path, kind), "A", path, P, M)
            b = _as_matrix(_require(table, "B", path, kind), "B", path, P, M)
            fam, default_sched = affine_matrix_system(a, b, 1)
            sched = schedule if schedule is not None else default_sched
            return _definition(kind, M, P, fam, sched, domain, label, path)
        if kind == "power":
            a = _as_matrix(_require(table, "A", path, kind), "A", path, P, M)
            alphas = table.get("alphas")
            if not isinstance(alphas, list) or len(alphas) != M:
                raise SystemFileError(
                    path, f"'alphas' must be a list of {M} exponents")
            transform = table.get("transform", "log")
            fam, default_sched = power_max_system(a, alphas, transform)
            sched = schedule if schedule is not None else default_sched
            return _definition(
                kind, M, P, fam, sched, domain, label, path,
                transform=transform,
                power_A=tuple(tuple(r) for r in a),
                power_alphas=tuple(float(v) for v in alphas))
        if kind == "grid":
            entries = _require(table, "f", path, kind)
            if not isinstance(entries, list):
                raise SystemFileError(path, "'f' must be a list of rows")
            fam = family_from_grid(entries, M, P)
            assert schedule is not None
            return _definition(kind, M, P, fam, schedule, domain, label, path)
        # kind == "block"
        gsrc = _require(table, "G", path, kind)
        if not isinstance(gsrc, list) or len(gsrc) != P \
                or not all(isinstance(g, str) for g in gsrc):
            raise SystemFileError(
                path, f"'G' must be a list of {P} expression strings")
        gs = tuple(parse_block(src, M) for src in gsrc)
        block = BlockSystem(M, P, gs)
        return SystemDefinition(
            kind=kind, M=M, P=P, block=block, family=None, schedule=None,
            domain=domain, label=label, path=str(path))
    except SystemFileError:
        raise
    except (ExprError, ValueError) as exc:
        raise SystemFileError(path, str(exc)) from None


def _load_schedule(table, path, kind, M, P) -> RankSchedule | None:
    has_k = "k" in table
    has_sched = "schedule" in table
    if kind == "block":
        if has_k or has_sched:
            raise SystemFileError(
                path, "kind 'block' encodes rank selection in its "
                "expressions; remove 'k'/'schedule'")
        return None
    if has_k and has_sched:
        raise SystemFileError(path, "give either 'k' or 'schedule', not both")
    if has_k:
        k = _as_int(table["k"], "k", path)
        if not 1 <= k <= M:
            raise SystemFileError(path, f"k={k} outside 1..M={M}")
        return RankSchedule.constant(k, P)
    if has_sched:
        sched = table["schedule"]
        if not isinstance(sched, list) or len(sched) != P:
            raise SystemFileError(
                path, f"'schedule' must list {P} rank indices (one per phase)")
        ks = tuple(_as_int(v, "schedule entry", path) for v in sched)
        for k in ks:
            if not 1 <= k <= M:
                raise SystemFileError(path, f"schedule index {k} outside 1..M={M}")
        return RankSchedule(ks)
    if kind == "power":
        return None  # builder defaults to max
    raise SystemFileError(path, f"kind {kind!r} needs 'k' or 'schedule'")


def _load_domain(table, path) -> DomainInterval:
    dom = table.get("domain")
    if dom is None:
        return DEFAULT_DOMAIN
    if (not isinstance(dom, list) or len(dom) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in dom)):
        raise SystemFileError(path, "'domain' must be [lo, hi]")
    try:
        return DomainInterval(float(dom[0]), float(dom[1]))
    except ValueError as exc:
        raise SystemFileError(path, str(exc)) from None


def _definition(kind, M, P, fam, sched, domain, label, path, **extra):
    return SystemDefinition(
        kind=kind, M=M, P=P, block=rank_family_to_block(fam, sched),
        family=fam, schedule=sched, domain=domain, label=label,
        path=str(path), **extra)
