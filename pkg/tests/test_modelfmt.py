import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stockflow.errors import ModelError, ParseError
from stockflow.modelfmt import (
    Action,
    format_expr,
    format_number,
    parse_model,
    parse_scenario,
    serialize_model,
    serialize_scenario,
    tokenize,
)
from stockflow.oilmarket import build_oil_model, data_path, scenario_a, scenario_b
from stockflow.sdcore import BinOp, Neg, Num, Var


# ---------------------------------------------------------------------------
# Generated corpus


def _number(rng):
    kind = rng.randrange(4)
    if kind == 0:
        return str(rng.randrange(0, 100))
    if kind == 1:
        return f"{rng.uniform(0, 50):.{rng.randrange(1, 6)}f}"
    if kind == 2:
        return f"{rng.randrange(1, 9)}e{rng.choice(['-', '+', ''])}{rng.randrange(0, 4)}"
    return repr(rng.random())


def _expr(rng, names, lookups, depth):
    if depth <= 0 or rng.random() < 0.3:
        choice = rng.random()
        if choice < 0.35 or not names:
            return _number(rng)
        if choice < 0.45:
            return "t"
        return rng.choice(names)
    kind = rng.randrange(8)
    sub = lambda: _expr(rng, names, lookups, depth - 1)  # noqa: E731
    if kind <= 2:
        return f"{sub()} {rng.choice('+-*/')} {sub()}"
    if kind == 3:
        return f"-{sub()}" if rng.random() < 0.5 else f"-({sub()})"
    if kind == 4:
        return f"({sub()})"
    if kind == 5:
        f = rng.choice(["min", "max", "clamp", "select"])
        n = {"min": 2, "max": 2, "clamp": 3, "select": 3}[f]
        return f"{f}({', '.join(sub() for _ in range(n))})"
    if kind == 6 and lookups:
        return f"{rng.choice(lookups)}({sub()})"
    return f"({sub()} {rng.choice(['<', '<=', '>', '>=', '==', '!='])} {sub()})"


def _pad(rng):
    return rng.choice([" ", "  ", "\t", " "])


def random_model_source(rng) -> str:
    """Syntactically and semantically valid model text in a random layout."""
    consts = [f"c{i}" for i in range(rng.randrange(0, 4))]
    lookups = [f"L{i}" for i in range(rng.randrange(0, 3))]
    stocks = [f"S{i}" for i in range(rng.randrange(1, 4))]
    flows = [f"f{i}" for i in range(rng.randrange(1, 4))]
    auxes = [f"a{i}" for i in range(rng.randrange(0, 4))]
    delays = [f"d{i}" for i in range(rng.randrange(0, 2))]
    decls = []
    for c in consts:
        decls.append(f"const {c} ={_pad(rng)}{rng.choice(['', '-'])}{_number(rng)}")
    for lk in lookups:
        xs = sorted(rng.sample(range(-20, 40), rng.randrange(1, 5)))
        pts = ", ".join(f"({x}, {_number(rng)})" for x in xs)
        decls.append(f"lookup {lk} = [{pts}]")
    # delays and stocks break cycles; auxes may use earlier auxes only
    base = consts + stocks + delays
    for i, a in enumerate(auxes):
        decls.append(f"aux {a} = {_expr(rng, base + auxes[:i], lookups, 3)}")
    for f in flows:
        decls.append(f"flow {f} = {_expr(rng, base + auxes, lookups, 3)}")
    for d in delays:
        lag = rng.choice(["0.5", "1", "2", "0.25"])
        decls.append(f"delay {d} = {_expr(rng, consts + stocks, lookups, 2)} by {lag}")
    for s in stocks:
        ins = rng.sample(flows, rng.randrange(0, len(flows) + 1))
        outs = rng.sample(flows, rng.randrange(0, len(flows) + 1))
        body = ""
        if ins:
            body += " in: " + ", ".join(ins)
        if outs:
            body += " out: " + ", ".join(outs)
        init = _expr(rng, consts, [], 2)
        decls.append(f"stock {s} = {init} {{{body} }}")
    rng.shuffle(decls)
    out = []
    for d in decls:
        if rng.random() < 0.2:
            out.append("# " + "comment " * rng.randrange(1, 3))
        out.append(d + (" # trailing" if rng.random() < 0.2 else ""))
    sep = rng.choice(["\n", "\n\n", "\r\n"])
    return sep.join(out) + sep


def corpus_valid(n: int, seed: int = 8):
    rng = random.Random(seed)
    return [random_model_source(rng) for _ in range(n)]


_BREAKERS = [
    lambda src, rng: src + "\naux bad = 1 @ 2\n",
    lambda src, rng: src + "\naux zz =",
    lambda src, rng: src + "\naux zz = undefined_q + 1\n",
    lambda src, rng: src + "\naux cy1 = cy2 + 1\naux cy2 = cy1 * 2\n",
    lambda src, rng: src + "\nflow qq = (1 + 2\n",
    lambda src, rng: src + "\naux deep = " + "(" * 3000 + "1" + ")" * 3000 + "\n",
    lambda src, rng: src + "\nstock ss = 1 { in: notaflow }\n",
    lambda src, rng: src + "\nlookup lk = [(1, 0), (0, 1)]\n",
    lambda src, rng: src + "\nconst k9 = 1e999\n",
    lambda src, rng: src + "\naux t = 1\n",
    lambda src, rng: src + "\naux ar = min(1)\n",
    lambda src, rng: src + "\naux fn = nosuch(1)\n",
    lambda src, rng: src + "\ndelay dn = 1 by -1\n",
    lambda src, rng: src + "\nstock s9 = f0 { }\n",
    lambda src, rng: src + "\naux cmp = 1 < 2 < 3\n",
    lambda src, rng: src.replace("stock", "stok", 1),
    lambda src, rng: src + "\n" + src,  # every name duplicated
    lambda src, rng: src + "\nflow = 3\n",
    lambda src, rng: src + "\nconst kk = x\n",
    lambda src, rng: src + "\naux a_y = 1 +* 2\n",
]


def corpus_invalid(n: int, seed: int = 18):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        src = random_model_source(rng)
        out.append(_BREAKERS[i % len(_BREAKERS)](src, rng))
    return out


# ---------------------------------------------------------------------------
# Round trip


@pytest.mark.parametrize("text", corpus_valid(200), ids=lambda s: str(abs(hash(s)) % 10 ** 6))
def test_round_trip(text):
    model = parse_model(text)
    canon = serialize_model(model)
    again = parse_model(canon)
    assert again == model
    assert serialize_model(again) == canon


@pytest.mark.parametrize("text", corpus_invalid(200))
def test_invalid_sources_are_rejected_with_diagnostics(text):
    with pytest.raises(ModelError) as info:
        parse_model(text, "bad.sfm")
    assert info.value.diagnostics
    for d in info.value.diagnostics:
        assert d.message and d.severity == "error"


@given(st.text(alphabet=st.sampled_from(list("stockflwaux cnlp=+-*/()[]{},:#\n0123456789.eyb_<>!")), max_size=120))
def test_parse_is_total(text):
    try:
        parse_model(text)
    except ModelError:
        pass


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_number_round_trips(x):
    assert float(format_number(x)) == x


# ---------------------------------------------------------------------------
# Specific behaviour


def test_oil_model_names():
    m = parse_model(data_path("oilmarket.sfm").read_text(), "oilmarket.sfm")
    assert "OilPrice" in m.stock_names
    assert {"TOS", "TOD", "ExS", "ExD", "Ratio"} <= set(m.aux_map)
    assert {"alpha1", "beta1"} <= set(m.constant_values)
    assert m == build_oil_model()


def test_error_span_points_after_dangling_operator():
    with pytest.raises(ParseError) as info:
        parse_model("flow f = 1/ # comment\n", "m.sfm")
    (d,) = info.value.diagnostics
    assert (d.span.file, d.span.line, d.span.column) == ("m.sfm", 1, 12)


def test_multiple_syntax_errors_are_all_reported():
    src = "aux a = (1\nconst b = x\naux c = 2\naux d = 3 +\n"
    with pytest.raises(ParseError) as info:
        parse_model(src)
    lines = [d.span.line for d in info.value.diagnostics]
    assert lines == [2, 2, 4]


def test_unresolved_reference_names_element():
    with pytest.raises(ModelError) as info:
        parse_model("flow f = z\nstock y = 0 { in: f }\n")
    assert "unresolved reference z in 'f'" in str(info.value)


def test_algebraic_cycle_detected():
    with pytest.raises(ModelError) as info:
        parse_model("aux a = b\naux b = a\nflow f = a\nstock y = 0 { in: f }\n")
    assert "algebraic cycle among a, b" in str(info.value)


def test_cycle_through_lagged_delay_and_stock_is_allowed():
    m = parse_model("aux a = d + 1\ndelay d = y by 1\nflow f = -a\nstock y = 1 { in: f }\n")
    assert set(m.delay_map) == {"d"}


def test_delay_loop_without_stock_cannot_start():
    with pytest.raises(ModelError, match="cannot initialise delays"):
        parse_model("aux a = d + 1\ndelay d = a by 1\n")


def test_zero_lag_delay_cycle_is_algebraic():
    with pytest.raises(ModelError, match="algebraic cycle"):
        parse_model("aux a = d + 1\ndelay d = a by 0\n")


def test_crlf_and_comments():
    m = parse_model("const k = 2 # two\r\nstock y = k { in: f }\r\nflow f = -k * y\r\n")
    assert m.constant_values["k"] == 2


def test_format_expr_minimal_parentheses():
    e = BinOp("-", Var("a"), BinOp("-", Var("b"), Var("c")))
    assert format_expr(e) == "a - (b - c)"
    assert format_expr(BinOp("*", BinOp("+", Var("a"), Num(1.0)), Var("b"))) == "(a + 1) * b"
    assert format_expr(Neg(BinOp("+", Var("a"), Var("b")))) == "-(a + b)"
    assert format_expr(BinOp("/", BinOp("/", Var("a"), Var("b")), Var("c"))) == "a / b / c"


def test_tokenizer_reports_bad_character_position():
    _, diags = tokenize("aux a = 1\naux b = $\n", "x")
    assert str(diags[0].span) == "x:2:9"


# ---------------------------------------------------------------------------
# Scenarios


def test_bundled_scenarios_parse():
    b = parse_scenario(data_path("scenario_b_spare.sfs").read_text(), "b.sfs")
    assert [e.action for e in b.events] == [Action.STEP_INPUT, Action.SWITCH_DECISION, Action.PULSE_INPUT]
    assert [e.at for e in b.events] == sorted(e.at for e in b.events)
    assert b == scenario_b(decision=1)[0]
    assert parse_scenario(data_path("scenario_b_hold.sfs").read_text()) == scenario_b(decision=0)[0]
    assert parse_scenario(data_path("scenario_a.sfs").read_text()) == scenario_a()[0]


def test_scenario_round_trip():
    src = ('model "m.sfm"\ngrid horizon = 10 dt = 0.5\nparam k = 2\n'
           "at 5 set OPECDecision = 0\nat 1 pulse x by 2 for 3\nat 2 step y by -1\nat 3 switch d = 1\n")
    doc = parse_scenario(src)
    assert [e.at for e in doc.events] == [1, 2, 3, 5]
    assert doc.events[-1].action is Action.SET_CONSTANT
    assert parse_scenario(serialize_scenario(doc)) == doc


@pytest.mark.parametrize("src, fragment", [
    ("at 1 switch d = 2\n", "0 or 1"),
    ("at 1 pulse x by 1 for 0\n", "duration"),
    ("at 1 jump x = 1\n", "unknown action"),
    ("grid speed = 3\n", "unknown grid setting"),
    ("frobnicate\n", "unknown statement"),
    ("at 1 set x = 1 2\n", "end of line"),
])
def test_scenario_errors(src, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_scenario(src)


def test_fixtures_match_generator():
    from stockflow.fixtures import fixture_texts

    for name, text in fixture_texts().items():
        assert data_path(name).read_text() == text, f"{name} is stale; run python -m stockflow.fixtures"
