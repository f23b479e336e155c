"""Periodic orbits and distances between them.

An orbit's ``phase_values`` are anchored to the absolute step index:
entry r is the limit value at steps n with (n-1) mod period = r.  Two
orbits from the same forcing can therefore be compared entry by entry;
:func:`orbit_distance` does exactly that over one common cycle, and
:func:`orbit_distance_min_rotation` reports the best match over cyclic
shifts as a separate, weaker figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["PeriodicOrbit", "orbit_distance", "orbit_distance_min_rotation"]


@dataclass(frozen=True)
class PeriodicOrbit:
    """A detected or solved periodic limit.

    ``residual`` is the worst deviation backing the claim (tail mismatch
    for detection, spread across block repetitions for extraction).
    ``onset`` is the earliest step from which the trajectory is periodic
    within tolerance, when known.
    """

    period: int
    phase_values: tuple[float, ...]
    residual: float
    onset: int | None = None

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError(f"period must be positive, got {self.period}")
        if len(self.phase_values) != self.period:
            raise ValueError(
                f"{len(self.phase_values)} phase values for period {self.period}")
        if self.residual < 0 or not math.isfinite(self.residual):
            raise ValueError(f"bad residual {self.residual!r}")

    def value_at(self, n: int) -> float:
        """Limit value at step n (1-based)."""
        return self.phase_values[(n - 1) % self.period]


def orbit_distance(a: PeriodicOrbit, b: PeriodicOrbit) -> float:
    """Sup distance with both orbits anchored to the absolute phase."""
    cycle = math.lcm(a.period, b.period)
    return max(abs(a.value_at(n) - b.value_at(n)) for n in range(1, cycle + 1))


def orbit_distance_min_rotation(a: PeriodicOrbit, b: PeriodicOrbit) -> float:
    """Smallest sup distance over cyclic shifts of the second orbit."""
    cycle = math.lcm(a.period, b.period)
    return min(
        max(abs(a.value_at(n) - b.value_at(n + r)) for n in range(1, cycle + 1))
        for r in range(cycle))
