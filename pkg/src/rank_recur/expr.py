"""A small expression language for scalar update maps.

Expressions are written in infix notation over one of two variable sets:

* scalar maps: ``x`` (the lagged state value) and ``n`` (the step index),
* block maps: ``y1`` .. ``yM`` ordered most recent first.

Grammar (EBNF, whitespace insignificant)::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := ("+" | "-") factor | power
    power   := atom ("^" factor)?          right associative, constant exponent
    atom    := NUMBER | IDENT | IDENT "(" args ")"
             | "rank" "(" INT ";" args ")" | "(" expr ")"
    args    := expr ("," expr)*

Functions: ``exp``, ``ln``, ``sin``, ``cos``, ``abs`` (unary), ``max``,
``min`` (two or more arguments), and ``rank(k; ...)`` which selects the
k-th largest argument counting duplicates.  ``pi`` is a named constant and
is folded to a literal at parse time.  Exponents must contain no variables;
this keeps every map piecewise differentiable in the state and lets the
affine analyzer recognise linear maps exactly.

Evaluation is strict about the numeric domain: ``ln`` of a non-positive
value, division by zero, a negative base under a fractional exponent, and
any non-finite intermediate all raise :class:`NumericDomainError` naming
the offending subexpression.  Two evaluators are provided with identical
semantics: a tree walker used for error reporting and a compiled closure
used in hot loops.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Union

__all__ = [
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "Rank",
    "Node",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ArityError",
    "NumericDomainError",
    "parse_scalar",
    "parse_block",
    "ScalarExpr",
    "BlockExpr",
    "to_source",
    "eval_ast",
    "compile_ast",
    "substitute",
    "free_vars",
    "is_constant",
]


# ---------------------------------------------------------------------------
# Errors


class ExprError(ValueError):
    """Base class for parse-time errors; carries a 1-based position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    """Malformed source text: bad token, unbalanced parens, stray input."""


class UnknownIdentifierError(ExprError):
    """An identifier that is neither a known function, constant nor variable."""


class ArityError(ExprError):
    """Wrong argument count, or a rank/block index out of range."""


class NumericDomainError(ArithmeticError):
    """Evaluation left the numeric domain.

    ``node`` is the smallest failing subexpression and ``env`` the variable
    binding in effect, when known.
    """

    def __init__(self, message: str, node: "Node | None" = None,
                 env: Mapping[str, float] | None = None):
        self.node = node
        self.env = dict(env) if env is not None else None
        if node is not None:
            message = f"{message} in '{to_source(node)}'"
            if self.env:
                binding = ", ".join(f"{k}={v!r}" for k, v in sorted(self.env.items()))
                message = f"{message} at {binding}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# Syntax tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Node", ...]


@dataclass(frozen=True)
class Rank:
    k: int
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, Bin, Call, Rank]

_UNARY_FUNCTIONS = ("exp", "ln", "sin", "cos", "abs")
_VARIADIC_FUNCTIONS = ("max", "min")
_CONSTANTS = {"pi": math.pi}


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
      (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op>[-+*/^(),;])
    | (?P<ws>[ \t\r\n]+)
    | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", an operator character, or "end"
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(src):
        kind = m.lastgroup
        text = m.group()
        col = m.start() - line_start + 1
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = m.start() + i + 1
            continue
        if kind == "bad":
            raise ExprSyntaxError(f"unexpected character {text!r}", line, col)
        if kind == "op":
            tokens.append(_Token(text, text, line, col))
        else:
            tokens.append(_Token(kind, text, line, col))
    tokens.append(_Token("end", "", line, len(src) - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser

_INT_RE = re.compile(r"\d+$")


class _Parser:
    """Recursive descent over the token list.

    ``check_var`` validates identifiers used as variables and raises with
    the token position on rejection.
    """

    def __init__(self, tokens: list[_Token],
                 check_var: Callable[[str, int, int], None]):
        self._toks = tokens
        self._i = 0
        self._check_var = check_var

    def _peek(self) -> _Token:
        return self._toks[self._i]

    def _next(self) -> _Token:
        tok = self._toks[self._i]
        self._i += 1
        return tok

    def _expect(self, kind: str) -> _Token:
        tok = self._peek()
        if tok.kind != kind:
            what = repr(tok.text) if tok.kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {kind!r}, found {what}",
                                  tok.line, tok.col)
        return self._next()

    def parse(self) -> Node:
        node = self.expr()
        tok = self._peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {tok.text!r}",
                                  tok.line, tok.col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._peek().kind in ("+", "-"):
            op = self._next().kind
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._peek().kind in ("*", "/"):
            op = self._next().kind
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self._peek()
        if tok.kind == "+":
            self._next()
            return self.factor()
        if tok.kind == "-":
            self._next()
            inner = self.factor()
            # Fold a negated literal so "-0.3" and "(-0.3)" parse alike.
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self._peek()
        if tok.kind != "^":
            return base
        self._next()
        expo = self.factor()
        if free_vars(expo):
            raise ExprSyntaxError("exponent must be constant", tok.line, tok.col)
        return Bin("^", base, expo)

    def atom(self) -> Node:
        tok = self._next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "(":
            node = self.expr()
            self._expect(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            if self._peek().kind != "(":
                if name in _CONSTANTS:
                    return Num(_CONSTANTS[name])
                self._check_var(name, tok.line, tok.col)
                return Var(name)
            if name == "rank":
                return self._rank_call(tok)
            if name in _UNARY_FUNCTIONS or name in _VARIADIC_FUNCTIONS:
                return self._function_call(tok)
            raise UnknownIdentifierError(f"unknown function {name!r}",
                                         tok.line, tok.col)
        what = repr(tok.text) if tok.kind != "end" else "end of input"
        raise ExprSyntaxError(f"expected an expression, found {what}",
                              tok.line, tok.col)

    def _args(self) -> tuple[Node, ...]:
        args = [self.expr()]
        while self._peek().kind == ",":
            self._next()
            args.append(self.expr())
        self._expect(")")
        return tuple(args)

    def _function_call(self, tok: _Token) -> Node:
        self._expect("(")
        args = self._args()
        if tok.text in _UNARY_FUNCTIONS and len(args) != 1:
            raise ArityError(f"{tok.text} takes exactly 1 argument, got {len(args)}",
                             tok.line, tok.col)
        if tok.text in _VARIADIC_FUNCTIONS and len(args) < 2:
            raise ArityError(f"{tok.text} takes at least 2 arguments, got {len(args)}",
                             tok.line, tok.col)
        return Call(tok.text, args)

    def _rank_call(self, tok: _Token) -> Node:
        self._expect("(")
        ktok = self._peek()
        if ktok.kind != "num" or not _INT_RE.match(ktok.text):
            raise ExprSyntaxError("rank index must be an integer literal",
                                  ktok.line, ktok.col)
        self._next()
        k = int(ktok.text)
        if k < 1:
            raise ArityError("rank index must be at least 1", ktok.line, ktok.col)
        self._expect(";")
        args = self._args()
        if k > len(args):
            raise ArityError(
                f"rank index {k} exceeds argument count {len(args)}",
                ktok.line, ktok.col)
        return Rank(k, args)


def _parse(src: str, check_var: Callable[[str, int, int], None]) -> Node:
    return _Parser(_tokenize(src), check_var).parse()


def _scalar_check(name: str, line: int, col: int) -> None:
    if name not in ("x", "n"):
        raise UnknownIdentifierError(
            f"unknown identifier {name!r}; scalar maps use 'x' and 'n'",
            line, col)


_BLOCK_VAR_RE = re.compile(r"y([0-9]+)$")


def _block_check(arity: int) -> Callable[[str, int, int], None]:
    def check(name: str, line: int, col: int) -> None:
        m = _BLOCK_VAR_RE.match(name)
        if m is None:
            raise UnknownIdentifierError(
                f"unknown identifier {name!r}; block maps use 'y1'..'y{arity}'",
                line, col)
        j = int(m.group(1))
        if not 1 <= j <= arity:
            raise ArityError(
                f"block variable {name!r} out of range 1..{arity}", line, col)
    return check


# ---------------------------------------------------------------------------
# Tree utilities


def _children(node: Node) -> Iterator[Node]:
    if isinstance(node, Neg):
        yield node.arg
    elif isinstance(node, Bin):
        yield node.left
        yield node.right
    elif isinstance(node, (Call, Rank)):
        yield from node.args


def free_vars(node: Node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset((node.name,))
    out: frozenset[str] = frozenset()
    for child in _children(node):
        out |= free_vars(child)
    return out


def is_constant(node: Node) -> bool:
    return not free_vars(node)


def substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    """Replace variables by subtrees; unmapped variables are kept."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        inner = substitute(node.arg, mapping)
        if isinstance(inner, Num):
            return Num(-inner.value)
        return Neg(inner)
    if isinstance(node, Bin):
        return Bin(node.op, substitute(node.left, mapping),
                   substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.fn, tuple(substitute(a, mapping) for a in node.args))
    if isinstance(node, Rank):
        return Rank(node.k, tuple(substitute(a, mapping) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Printer

_BIN_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_NEG_PREC = 25
_ATOM_PREC = 40


def _node_prec(node: Node) -> int:
    if isinstance(node, Bin):
        return _BIN_PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    if isinstance(node, Num) and node.value < 0:
        return _NEG_PREC
    return _ATOM_PREC


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(node: Node, _min_prec: int = 0) -> str:
    """Render with minimal parentheses; reparsing restores the same tree."""
    prec = _node_prec(node)
    if isinstance(node, Num):
        text = _fmt_num(node.value)
    elif isinstance(node, Var):
        text = node.name
    elif isinstance(node, Neg):
        text = "-" + to_source(node.arg, _NEG_PREC)
    elif isinstance(node, Bin):
        if node.op == "^":
            # Right associative; any compound base needs parentheses.
            left = to_source(node.left, _BIN_PREC["^"] + 1)
            right = to_source(node.right, _NEG_PREC)
        else:
            left = to_source(node.left, prec)
            right = to_source(node.right, prec + 1)
        text = f"{left}{node.op}{right}"
    elif isinstance(node, Call):
        text = f"{node.fn}({', '.join(to_source(a) for a in node.args)})"
    elif isinstance(node, Rank):
        text = f"rank({node.k}; {', '.join(to_source(a) for a in node.args)})"
    else:
        raise TypeError(f"not an expression node: {node!r}")
    if prec < _min_prec:
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Evaluation (tree walker)


def _krank(k: int, *values: float) -> float:
    # k-th largest counting duplicates: sort ascending, index from the top.
    return sorted(values)[len(values) - k]


def _ln_guarded(v: float) -> float:
    if v <= 0.0:
        raise NumericDomainError(f"ln of non-positive value {v!r}")
    return math.log(v)


def _pow_guarded(base: float, expo: float) -> float:
    if base < 0.0:
        raise NumericDomainError(
            f"negative base {base!r} under non-integer exponent {expo!r}")
    return base ** expo


def eval_ast(node: Node, env: Mapping[str, float]) -> float:
    """Evaluate with full domain checking.

    Raises :class:`NumericDomainError` locating the smallest failing
    subexpression.  Matches the compiled evaluator bit for bit on success.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise NumericDomainError(f"unbound variable {node.name!r}", node) from None
    if isinstance(node, Neg):
        return -eval_ast(node.arg, env)
    if isinstance(node, Bin):
        left = eval_ast(node.left, env)
        right = eval_ast(node.right, env)
        try:
            if node.op == "+":
                out = left + right
            elif node.op == "-":
                out = left - right
            elif node.op == "*":
                out = left * right
            elif node.op == "/":
                out = left / right
            else:
                out = _apply_pow(left, right)
        except ZeroDivisionError:
            raise NumericDomainError("division by zero", node, env) from None
        except OverflowError:
            raise NumericDomainError("overflow", node, env) from None
        except NumericDomainError as exc:
            if exc.node is None:
                raise NumericDomainError(str(exc), node, env) from None
            raise
        if not math.isfinite(out):
            raise NumericDomainError("non-finite result", node, env)
        return out
    if isinstance(node, Call):
        args = [eval_ast(a, env) for a in node.args]
        try:
            if node.fn == "exp":
                out = math.exp(args[0])
            elif node.fn == "ln":
                out = _ln_guarded(args[0])
            elif node.fn == "sin":
                out = math.sin(args[0])
            elif node.fn == "cos":
                out = math.cos(args[0])
            elif node.fn == "abs":
                out = abs(args[0])
            elif node.fn == "max":
                out = max(args)
            elif node.fn == "min":
                out = min(args)
            else:
                raise NumericDomainError(f"unknown function {node.fn!r}", node)
        except OverflowError:
            raise NumericDomainError("overflow", node, env) from None
        except NumericDomainError as exc:
            if exc.node is None:
                raise NumericDomainError(str(exc), node, env) from None
            raise
        if not math.isfinite(out):
            raise NumericDomainError("non-finite result", node, env)
        return out
    if isinstance(node, Rank):
        return _krank(node.k, *(eval_ast(a, env) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


def _apply_pow(base: float, expo: float) -> float:
    # Integer exponents use the ** integer path so the compiled and walking
    # evaluators agree bit for bit, and so negative bases stay legal.
    if float(expo).is_integer() and abs(expo) <= 2 ** 31:
        return base ** int(expo)
    return _pow_guarded(base, expo)


# ---------------------------------------------------------------------------
# Evaluation (compiled closures)

_COMPILE_NS = {
    "__builtins__": {},
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
    "max": max,
    "min": min,
    "_ln": _ln_guarded,
    "_pow": _pow_guarded,
    "_krank": _krank,
}


def _emit(node: Node) -> str:
    if isinstance(node, Num):
        return f"({node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_emit(node.arg)})"
    if isinstance(node, Bin):
        if node.op == "^":
            expo = eval_ast(node.right, {})
            if float(expo).is_integer() and abs(expo) <= 2 ** 31:
                return f"({_emit(node.left)}**{int(expo)})"
            return f"_pow({_emit(node.left)}, {expo!r})"
        return f"({_emit(node.left)}{node.op}{_emit(node.right)})"
    if isinstance(node, Call):
        fn = "_ln" if node.fn == "ln" else node.fn
        return f"{fn}({', '.join(_emit(a) for a in node.args)})"
    if isinstance(node, Rank):
        return f"_krank({node.k}, {', '.join(_emit(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


@lru_cache(maxsize=4096)
def compile_ast(node: Node, params: tuple[str, ...]) -> Callable[..., float]:
    """Compile to a positional closure over ``params``.

    The closure raises the same :class:`NumericDomainError` guards as
    :func:`eval_ast` but without source locations; hot loops re-walk the
    tree on failure to recover them.
    """
    unknown = free_vars(node) - set(params)
    if unknown:
        raise ValueError(f"expression uses variables outside {params}: "
                         f"{sorted(unknown)}")
    source = f"lambda {', '.join(params)}: {_emit(node)}"
    return eval(source, dict(_COMPILE_NS))


def eval_checked(compiled: Callable[..., float], node: Node,
                 params: tuple[str, ...], args: tuple[float, ...]) -> float:
    """Run a compiled closure, re-walking the tree to locate any failure."""
    try:
        out = compiled(*args)
    except ArithmeticError:
        eval_ast(node, dict(zip(params, args)))
        raise
    if not math.isfinite(out):
        eval_ast(node, dict(zip(params, args)))
        raise NumericDomainError("non-finite result", node,
                                 dict(zip(params, args)))
    return out


# ---------------------------------------------------------------------------
# Public wrappers


@dataclass(frozen=True)
class ScalarExpr:
    """A map (x, n) -> float.  Calling ignores ``n`` unless used."""

    ast: Node

    @property
    def source(self) -> str:
        return to_source(self.ast)

    @property
    def uses_n(self) -> bool:
        return "n" in free_vars(self.ast)

    def __call__(self, x: float, n: float = 0.0) -> float:
        return eval_ast(self.ast, {"x": x, "n": n})

    def compiled(self) -> Callable[[float, float], float]:
        return compile_ast(self.ast, ("x", "n"))

    def at_step(self, n: int) -> "ScalarExpr":
        """Specialise the step index to a literal."""
        return ScalarExpr(substitute(self.ast, {"n": Num(float(n))}))


@dataclass(frozen=True)
class BlockExpr:
    """A map (y1, ..., yM) -> float over a fixed arity M."""

    ast: Node
    arity: int

    @property
    def source(self) -> str:
        return to_source(self.ast)

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(f"y{j}" for j in range(1, self.arity + 1))

    def __call__(self, ys: "tuple[float, ...] | list[float]") -> float:
        if len(ys) != self.arity:
            raise ArityError(f"expected {self.arity} arguments, got {len(ys)}")
        return eval_ast(self.ast, dict(zip(self.params, ys)))

    def compiled(self) -> Callable[..., float]:
        return compile_ast(self.ast, self.params)


def parse_scalar(src: str) -> ScalarExpr:
    """Parse a scalar map over ``x`` and ``n``."""
    return ScalarExpr(_parse(src, _scalar_check))


def parse_block(src: str, arity: int) -> BlockExpr:
    """Parse a block map over ``y1`` .. ``y{arity}``."""
    if arity < 1:
        raise ValueError(f"arity must be at least 1, got {arity}")
    return BlockExpr(_parse(src, _block_check(arity)), arity)
