"""Order statistics and the sup norm.

``k_rank(v, k)`` selects the k-th largest entry counting duplicates, so
``k_rank(v, 1) = max(v)`` and ``k_rank(v, len(v)) = min(v)``.  The result
is always one of the inputs, which makes the selection non-expansive in
the sup norm: perturbing every input by at most eps moves the k-th
largest by at most eps, exactly, with no rounding slack.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .expr import NumericDomainError

__all__ = ["k_rank", "k_rank_many", "median", "sup_norm", "sup_distance"]


def k_rank(v: Sequence[float], k: int) -> float:
    """k-th largest of ``v``, duplicates counted.

    Raises ``ValueError`` for an empty input or k outside 1..len(v) and
    :class:`NumericDomainError` for non-finite entries.
    """
    vals = [float(x) for x in v]
    if not vals:
        raise ValueError("k_rank of an empty sequence")
    if not 1 <= k <= len(vals):
        raise ValueError(f"rank index {k} outside 1..{len(vals)}")
    for x in vals:
        if not math.isfinite(x):
            raise NumericDomainError(f"non-finite entry {x!r} in k_rank input")
    return sorted(vals)[len(vals) - k]


def k_rank_many(rows: np.ndarray, k: int) -> np.ndarray:
    """Row-wise k-th largest for a 2-d array (no finiteness checks)."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {rows.shape}")
    m = rows.shape[1]
    if not 1 <= k <= m:
        raise ValueError(f"rank index {k} outside 1..{m}")
    return np.sort(rows, axis=1)[:, m - k]


def median(v: Sequence[float]) -> float:
    """Middle entry of an odd-length vector: k_rank with k = (M+1)/2."""
    m = len(v)
    if m % 2 == 0:
        raise ValueError(f"median needs an odd length, got {m}")
    return k_rank(v, (m + 1) // 2)


def sup_norm(values: Iterable[float]) -> float:
    """Largest absolute entry; 0.0 for an empty input."""
    arr = np.asarray(values if isinstance(values, np.ndarray) else list(values),
                     dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def sup_distance(x: Iterable[float], y: Iterable[float]) -> float:
    """Sup-norm distance between two equal-length vectors."""
    xv = np.asarray(x if isinstance(x, np.ndarray) else list(x), dtype=float)
    yv = np.asarray(y if isinstance(y, np.ndarray) else list(y), dtype=float)
    if xv.shape != yv.shape:
        raise ValueError(f"shape mismatch {xv.shape} vs {yv.shape}")
    if xv.size == 0:
        return 0.0
    return float(np.max(np.abs(xv - yv)))
