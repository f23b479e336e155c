"""Lipschitz bounds for expression maps on an interval.

Three estimators with different guarantees:

* :func:`linear_coefficients` recognises maps that are affine in the state
  and returns the slope exactly; no sampling and no safety factor.
* :func:`estimate_scalar_lipschitz` samples the derivative of a scalar map
  on a uniform grid and inflates the largest magnitude by a safety factor.
  A heuristic upper bound: correct for maps whose derivative varies slowly
  between grid points, but a sharp spike can slip through.
* :func:`estimate_block_lipschitz` samples difference quotients of a block
  map over random pairs, half independent and half tight aligned-sign
  corner perturbations.  This is a lower bound and therefore a
  falsification tool: a value at or above 1 refutes contraction on the
  window, a value below 1 proves nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import (
    Bin,
    BlockExpr,
    Call,
    Neg,
    Node,
    Num,
    NumericDomainError,
    Rank,
    ScalarExpr,
    Var,
    compile_ast,
    eval_ast,
    eval_checked,
    is_constant,
)

__all__ = [
    "DomainInterval",
    "DEFAULT_DOMAIN",
    "DEFAULT_GRID_POINTS",
    "DEFAULT_PAIRS",
    "DEFAULT_SAFETY_FACTOR",
    "LipschitzEstimate",
    "linear_coefficients",
    "estimate_scalar_lipschitz",
    "estimate_block_lipschitz",
]

DEFAULT_GRID_POINTS = 10001
DEFAULT_PAIRS = 100_000
DEFAULT_SAFETY_FACTOR = 1.05


@dataclass(frozen=True)
class DomainInterval:
    """A closed interval [lo, hi] with lo < hi, both finite."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @classmethod
    def of(cls, dom: "DomainInterval | tuple[float, float]") -> "DomainInterval":
        if isinstance(dom, DomainInterval):
            return dom
        lo, hi = dom
        return cls(float(lo), float(hi))

    def __iter__(self):
        return iter((self.lo, self.hi))


DEFAULT_DOMAIN = DomainInterval(-10.0, 10.0)


@dataclass(frozen=True)
class LipschitzEstimate:
    """A sup-norm Lipschitz figure for one map on one window.

    ``method`` is one of ``"analytic-affine"`` (exact, domain free),
    ``"derivative-sampling"`` (heuristic upper bound on the window) or
    ``"pair-sampling"`` (lower bound on the window).  ``witness`` records
    the sample attaining the bound for the sampled methods.
    """

    bound: float
    method: str
    samples: int
    safety_factor: float
    domain: DomainInterval | None
    witness: tuple[float, ...] | None = None

    @property
    def exact(self) -> bool:
        return self.method == "analytic-affine"

    @property
    def certifies_contraction(self) -> bool:
        """Bound below 1 by a method that can certify (not pair sampling)."""
        return self.method != "pair-sampling" and self.bound < 1.0

    @property
    def refutes_contraction(self) -> bool:
        return self.bound >= 1.0

    def describe(self) -> str:
        where = f" on [{self.domain.lo:g}, {self.domain.hi:g}]" if self.domain else ""
        extra = ""
        if self.method != "analytic-affine":
            extra = f", {self.samples} samples, safety {self.safety_factor:g}"
        return f"{self.bound!r} ({self.method}{where}{extra})"


def linear_coefficients(node: Node, var: str = "x") -> tuple[float, float] | None:
    """Exact (slope, intercept) when the tree is affine in ``var``.

    Constant subtrees are folded numerically; any other shape returns
    ``None``.  Division by a constant zero and domain failures inside
    constant subtrees also return ``None`` so the caller falls back to
    sampling, which reports the failure properly.
    """
    if isinstance(node, Num):
        return 0.0, node.value
    if isinstance(node, Var):
        if node.name == var:
            return 1.0, 0.0
        return None
    if isinstance(node, Neg):
        inner = linear_coefficients(node.arg, var)
        if inner is None:
            return None
        return -inner[0], -inner[1]
    if isinstance(node, Bin):
        if node.op in ("+", "-"):
            left = linear_coefficients(node.left, var)
            right = linear_coefficients(node.right, var)
            if left is None or right is None:
                return None
            if node.op == "+":
                return left[0] + right[0], left[1] + right[1]
            return left[0] - right[0], left[1] - right[1]
        if node.op == "*":
            left = linear_coefficients(node.left, var)
            right = linear_coefficients(node.right, var)
            if left is None or right is None:
                return None
            if left[0] == 0.0:
                return left[1] * right[0], left[1] * right[1]
            if right[0] == 0.0:
                return right[1] * left[0], right[1] * left[1]
            return None
        if node.op == "/":
            left = linear_coefficients(node.left, var)
            right = linear_coefficients(node.right, var)
            if left is None or right is None or right[0] != 0.0:
                return None
            if right[1] == 0.0:
                return None
            return left[0] / right[1], left[1] / right[1]
        # fall through to the constant-subtree case for "^"
    if is_constant(node):
        try:
            return 0.0, eval_ast(node, {})
        except NumericDomainError:
            return None
    return None


def _specialise(f: ScalarExpr, n: int | None) -> Node:
    if f.uses_n:
        if n is None:
            raise ValueError("the map depends on 'n'; a step index is required")
        return f.at_step(n).ast
    return f.ast


def estimate_scalar_lipschitz(
    f: ScalarExpr,
    n: int | None = None,
    domain: DomainInterval | tuple[float, float] = DEFAULT_DOMAIN,
    grid_points: int = DEFAULT_GRID_POINTS,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> LipschitzEstimate:
    """Lipschitz figure for a scalar map at a fixed step index.

    Affine maps short-circuit to the exact slope.  Everything else gets
    derivative sampling on ``grid_points`` uniform points: central
    differences in the interior, one-sided at the endpoints, largest
    magnitude times ``safety_factor``.  A numeric-domain failure at any
    grid point aborts with the offending point in the message.
    """
    dom = DomainInterval.of(domain)
    if grid_points < 3:
        raise ValueError(f"grid_points must be at least 3, got {grid_points}")
    ast = _specialise(f, n)
    lin = linear_coefficients(ast)
    if lin is not None:
        return LipschitzEstimate(abs(lin[0]), "analytic-affine", 0, 1.0, None)

    xs = np.linspace(dom.lo, dom.hi, grid_points)
    compiled = compile_ast(ast, ("x",))
    ys = np.empty(grid_points)
    for i, x in enumerate(xs):
        ys[i] = eval_checked(compiled, ast, ("x",), (float(x),))
    slopes = np.empty(grid_points)
    slopes[1:-1] = (ys[2:] - ys[:-2]) / (xs[2:] - xs[:-2])
    slopes[0] = (ys[1] - ys[0]) / (xs[1] - xs[0])
    slopes[-1] = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    worst = int(np.argmax(np.abs(slopes)))
    bound = safety_factor * float(abs(slopes[worst]))
    return LipschitzEstimate(bound, "derivative-sampling", grid_points,
                             safety_factor, dom, witness=(float(xs[worst]),))


def estimate_block_lipschitz(
    g: BlockExpr,
    domain: DomainInterval | tuple[float, float] = DEFAULT_DOMAIN,
    pairs: int = DEFAULT_PAIRS,
    seed: int = 0,
) -> LipschitzEstimate:
    """Largest sampled difference quotient of a block map.

    Half the pairs are independent uniform draws over the window, half are
    corner probes ``y = x ± delta`` with one shared magnitude and random
    signs per coordinate, which is where rank and max selections switch
    branches.  The result is a lower bound on the true constant; use it to
    refute contraction, never to certify it.
    """
    dom = DomainInterval.of(domain)
    if pairs < 1:
        raise ValueError(f"pairs must be positive, got {pairs}")
    rng = np.random.default_rng(seed)
    m = g.arity
    compiled = g.compiled()
    ast = g.ast
    params = g.params

    n_iid = pairs // 2
    n_corner = pairs - n_iid

    xs = rng.uniform(dom.lo, dom.hi, (pairs, m))
    ys = np.empty_like(xs)
    ys[:n_iid] = rng.uniform(dom.lo, dom.hi, (n_iid, m))
    # Corner probes: delta spans eight decades below a quarter window.
    delta = dom.width * 10.0 ** rng.uniform(-8.0, math.log10(0.25), n_corner)
    signs = rng.choice((-1.0, 1.0), (n_corner, m))
    probe = xs[n_iid:] + signs * delta[:, None]
    flip = (probe < dom.lo) | (probe > dom.hi)
    probe[flip] = (xs[n_iid:] - signs * delta[:, None])[flip]
    ys[n_iid:] = probe

    best = 0.0
    witness: tuple[float, ...] | None = None
    for i in range(pairs):
        denom = float(np.max(np.abs(xs[i] - ys[i])))
        if denom == 0.0:
            continue
        # Plain-float arguments keep the closures on the scalar math path.
        row_x = tuple(float(v) for v in xs[i])
        row_y = tuple(float(v) for v in ys[i])
        gx = eval_checked(compiled, ast, params, row_x)
        gy = eval_checked(compiled, ast, params, row_y)
        ratio = abs(gx - gy) / denom
        if ratio > best:
            best = ratio
            witness = row_x + row_y
    return LipschitzEstimate(best, "pair-sampling", pairs, 1.0, dom,
                             witness=witness)
