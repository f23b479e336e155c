import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rank_recur.expr import (
    ArityError,
    Bin,
    Call,
    ExprSyntaxError,
    Neg,
    Num,
    NumericDomainError,
    Rank,
    UnknownIdentifierError,
    Var,
    compile_ast,
    eval_ast,
    eval_checked,
    parse_block,
    parse_scalar,
    to_source,
)

# value oracles computed by hand or with a plain desk calculator
EVAL_TABLE = [
    ("0.5*x + 1", 2.0, 0, 2.0),
    ("max(1 - 2*x, 2*x - 1)", 0.25, 0, 0.5),
    ("max(1 - 2*x, 2*x - 1)", 0.75, 0, 0.5),
    ("exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)", 0.0, 1, 1.0794851545543833),
    ("2 + 3*4", 0.0, 0, 14.0),
    ("2*3 + 4", 0.0, 0, 10.0),
    ("-x^2", 3.0, 0, -9.0),
    ("(-x)^2", 3.0, 0, 9.0),
    ("2^3^2", 0.0, 0, 512.0),
    ("x/4/5", 40.0, 0, 2.0),
    ("x - 2 - 3", 10.0, 0, 5.0),
    ("abs(-3.5)", 0.0, 0, 3.5),
    ("min(3, 1, 2)", 0.0, 0, 1.0),
    ("max(3, 1, 2)", 0.0, 0, 3.0),
    ("rank(2; 3, 1, 2)", 0.0, 0, 2.0),
    ("rank(1; -5, -7)", 0.0, 0, -5.0),
    ("rank(3; x, x + 1, x - 1)", 0.0, 0, -1.0),
    ("sin(pi/2)", 0.0, 0, 1.0),
    ("cos(0)", 0.0, 0, 1.0),
    ("ln(exp(2))", 0.0, 0, 2.0),
    ("x^0.5", 9.0, 0, 3.0),
    ("x^-1", 4.0, 0, 0.25),
    ("2*pi", 0.0, 0, 6.283185307179586),
    ("(1 + 2)*(3 - 4)", 0.0, 0, -3.0),
    ("0.1*x + x*0.2", 10.0, 0, 3.0),
    ("1/(1 + x^2)", 2.0, 0, 0.2),
]


@pytest.mark.parametrize("src,x,n,expected", EVAL_TABLE)
def test_eval_table(src, x, n, expected):
    f = parse_scalar(src)
    assert f(x, n) == expected


@pytest.mark.parametrize("src,x,n,expected", EVAL_TABLE)
def test_compiled_matches_walker_bitwise(src, x, n, expected):
    f = parse_scalar(src)
    walked = eval_ast(f.ast, {"x": x, "n": float(n)})
    compiled = eval_checked(f.compiled(), f.ast, ("x", "n"), (x, float(n)))
    assert compiled == walked


def test_parse_builds_expected_shape():
    f = parse_scalar("0.5*x + 1")
    assert f.ast == Bin("+", Bin("*", Num(0.5), Var("x")), Num(1.0))


def test_tent_parses():
    f = parse_scalar("max(1 - 2*x, 2*x - 1)")
    assert isinstance(f.ast, Call) and f.ast.fn == "max"


def test_uses_n_flag():
    assert parse_scalar("x + n").uses_n
    assert not parse_scalar("x + 1").uses_n


def test_at_step_substitutes_n():
    f = parse_scalar("x + 10*n")
    g = f.at_step(3)
    assert not g.uses_n
    assert g(1.0) == 31.0


# -- parse errors ------------------------------------------------------------

def test_unbalanced_rank_call():
    with pytest.raises(ExprSyntaxError):
        parse_scalar("rank(2; x, 1, 3")


def test_error_carries_position():
    with pytest.raises(ExprSyntaxError) as exc:
        parse_scalar("1 + $")
    assert exc.value.line == 1
    assert exc.value.col == 5


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse_scalar("x + y")
    with pytest.raises(UnknownIdentifierError):
        parse_scalar("foo(x)")


def test_non_constant_exponent_rejected():
    with pytest.raises(ExprSyntaxError):
        parse_scalar("2^x")
    with pytest.raises(ExprSyntaxError):
        parse_scalar("x^(x + 1)")


def test_constant_exponent_subtree_allowed():
    assert parse_scalar("x^(1 + 2)")(2.0) == 8.0


def test_rank_k_must_be_literal_in_range():
    with pytest.raises(ExprSyntaxError):
        parse_scalar("rank(x; 1, 2)")
    with pytest.raises(ArityError):
        parse_scalar("rank(3; 1, 2)")
    with pytest.raises(ArityError):
        parse_scalar("rank(0; 1, 2)")


def test_function_arity_checked():
    with pytest.raises(ArityError):
        parse_scalar("exp(1, 2)")
    with pytest.raises(ArityError):
        parse_scalar("max(1)")


def test_block_vars():
    g = parse_block("0.5*(max(y1, y2) - rank(2; y1, y2))", 2)
    assert g.arity == 2
    assert g((4.0, 2.0)) == 0.5 * (4.0 - 2.0)
    with pytest.raises(ArityError):
        parse_block("y3", 2)


def test_block_rank1_equals_max():
    g = parse_block("rank(1; y1, y2)", 2)
    assert g((3.0, 7.0)) == 7.0
    assert g((3.0, -7.0)) == 3.0


def test_block_rejects_n():
    with pytest.raises(UnknownIdentifierError):
        parse_block("y1 + n", 2)


# -- numeric domain errors ---------------------------------------------------

def test_ln_domain_error_names_subexpression():
    f = parse_scalar("1 + ln(x - 5)")
    with pytest.raises(NumericDomainError) as exc:
        f(0.0)
    msg = str(exc.value)
    assert "ln(x-5)" in msg
    assert "x=0.0" in msg


def test_division_by_zero():
    with pytest.raises(NumericDomainError):
        parse_scalar("1/x")(0.0)


def test_negative_base_fractional_exponent():
    with pytest.raises(NumericDomainError):
        parse_scalar("x^0.5")(-4.0)


def test_integer_exponent_of_negative_base_ok():
    assert parse_scalar("x^3")(-2.0) == -8.0


def test_overflow_is_domain_error():
    with pytest.raises(NumericDomainError):
        parse_scalar("exp(x)")(1000.0)


def test_walker_and_compiled_agree_on_errors():
    f = parse_scalar("ln(x)")
    with pytest.raises(NumericDomainError):
        eval_ast(f.ast, {"x": -1.0})
    with pytest.raises(NumericDomainError):
        f(-1.0)


# -- printer round trip ------------------------------------------------------

ROUND_TRIP_SOURCES = [
    "0.5*x + 1",
    "max(1 - 2*x, 2*x - 1)",
    "exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)",
    "-x^2",
    "(-x)^2",
    "x - (2 - 3)",
    "(x + 1)*(x - 1)",
    "x/(2*x + 1)",
    "rank(2; x, 1, 3)",
    "x^-1",
    "-0.3",
    "abs(x)*min(x, 0, 1)",
]


@pytest.mark.parametrize("src", ROUND_TRIP_SOURCES)
def test_parse_print_round_trip(src):
    ast = parse_scalar(src).ast
    assert parse_scalar(to_source(ast)).ast == ast


def _scalar_leaves():
    finite = st.floats(allow_nan=False, allow_infinity=False, width=64,
                       min_value=-1e6, max_value=1e6)
    return st.one_of(finite.map(Num), st.just(Var("x")), st.just(Var("n")))


def _ast_strategy():
    finite = st.floats(allow_nan=False, allow_infinity=False, width=64,
                       min_value=-1e6, max_value=1e6)

    def extend(children):
        ops = st.sampled_from(["+", "-", "*", "/"])
        binary = st.builds(Bin, ops, children, children)
        # the parser folds "-literal" into Num, so never wrap Num in Neg
        negs = st.builds(Neg, children.filter(lambda a: not isinstance(a, Num)))
        powers = st.builds(lambda b, e: Bin("^", b, Num(e)), children, finite)
        calls1 = st.builds(lambda n, a: Call(n, (a,)),
                           st.sampled_from(["exp", "ln", "sin", "cos", "abs"]),
                           children)
        callsm = st.builds(lambda n, args: Call(n, tuple(args)),
                           st.sampled_from(["max", "min"]),
                           st.lists(children, min_size=2, max_size=4))
        ranks = st.builds(
            lambda k_args: Rank(k_args[0], tuple(k_args[1])),
            st.integers(1, 4).flatmap(
                lambda m: st.tuples(st.integers(1, m),
                                    st.lists(children, min_size=m, max_size=m))))
        return st.one_of(binary, negs, powers, calls1, callsm, ranks)

    return st.recursive(_scalar_leaves(), extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_ast_strategy())
def test_round_trip_random_asts(ast):
    assert parse_scalar(to_source(ast)).ast == ast


@settings(max_examples=100, deadline=None)
@given(_ast_strategy(),
       st.floats(-3, 3, allow_nan=False),
       st.integers(0, 9))
def test_walker_compiled_bitwise_random(ast, x, n):
    fn = compile_ast(ast, ("x", "n"))
    args = (x, float(n))
    try:
        walked = eval_ast(ast, {"x": args[0], "n": args[1]})
    except NumericDomainError:
        with pytest.raises(NumericDomainError):
            eval_checked(fn, ast, ("x", "n"), args)
        return
    assert eval_checked(fn, ast, ("x", "n"), args) == walked
