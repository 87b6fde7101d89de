"""Text formats: ``.sfm`` model files and ``.sfs`` scenario overlays.

Model grammar::

    model      := { decl }
    decl       := stock | flow | aux | const | lookup | delay
    stock      := "stock" IDENT "=" expr "{" ["in:" names] ["out:" names] "}"
    flow       := "flow" IDENT "=" expr
    aux        := "aux" IDENT "=" expr
    const      := "const" IDENT "=" NUMBER
    delay      := "delay" IDENT "=" expr "by" NUMBER
    lookup     := "lookup" IDENT "=" "[" pair {"," pair} "]"
    pair       := "(" NUMBER "," NUMBER ")"

Expressions support ``+ - * /``, unary minus, comparisons (``< <= > >= ==
!=``, yielding 1 or 0), ``min(a, b)``, ``max(a, b)``, ``clamp(x, lo, hi)``,
``select(cond, a, b)``, lookup application ``table(x)`` and the simulation
time ``t``. ``#`` starts a comment.

Scenario grammar, one statement per line::

    model "oilmarket.sfm"
    grid horizon = 120 dt = 0.0625 t0 = 0 data = 1
    param NAME = NUMBER
    at TIME set NAME = NUMBER
    at TIME switch NAME = 0|1
    at TIME step NAME by NUMBER
    at TIME pulse NAME by NUMBER for DURATION
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

from .errors import Diagnostic, ModelError, ParseError, SourceSpan
from .sdcore import (
    AuxDef,
    BinOp,
    Call,
    ConstDef,
    DelayBlock,
    FlowDef,
    LookupDef,
    Model,
    Neg,
    Num,
    StockDef,
    Time,
    Var,
    build_model,
)

KEYWORDS = {"stock", "flow", "aux", "const", "lookup", "delay", "by"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op><=|>=|==|!=|[-+*/<>=(){}\[\],:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, string, op, nl, eof
    text: str
    line: int
    column: int

    @property
    def end_column(self) -> int:
        return self.column + len(self.text)


def tokenize(text: str, file: str = "<string>"):
    """Split source into tokens. Returns (tokens, diagnostics)."""
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            diags.append(Diagnostic(f"unexpected character {text[pos]!r}", SourceSpan(file, line, col, 1)))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(Token("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, diags


class _Syntax(Exception):
    def __init__(self, diag):
        self.diag = diag


class _Parser:
    def __init__(self, text: str, file: str, newlines: bool):
        tokens, self.diags = tokenize(text.replace("\r\n", "\n"), file)
        if not newlines:
            tokens = [t for t in tokens if t.kind != "nl"]
        self.tokens = tokens
        self.file = file
        self.pos = 0

    # -- token helpers ------------------------------------------------------
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        self.pos = min(self.pos + 1, len(self.tokens) - 1)
        return tok

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.column, max(1, len(tok.text)))

    def error(self, expected: str) -> _Syntax:
        tok = self.peek()
        if tok.kind in ("eof", "nl") and self.pos > 0:
            prev = self.tokens[self.pos - 1]
            if prev.kind != "nl":
                where = SourceSpan(self.file, prev.line, prev.end_column, 1)
                return _Syntax(Diagnostic(f"expected {expected} after {prev.text!r}", where))
        found = "end of input" if tok.kind == "eof" else "end of line" if tok.kind == "nl" else repr(tok.text)
        return _Syntax(Diagnostic(f"expected {expected}, found {found}", self.span(tok)))

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, text):
            raise self.error(what or (repr(text) if text else kind))
        return self.advance()

    def name(self, what: str = "a name") -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(what)
        return self.advance()

    def number(self, signed: bool = True) -> float:
        neg = False
        if signed and self.at("op", "-"):
            self.advance()
            neg = True
        tok = self.expect("number", what="a number")
        value = float(tok.text)
        if not math.isfinite(value):
            raise _Syntax(Diagnostic(f"number {tok.text} is out of range", self.span(tok)))
        return -value if neg else value

    def recover(self, starts: set[str], began: int):
        """Skip to the next token that can begin a declaration.

        A keyword that ended the failed declaration early starts the next one.
        """
        if self.pos == began:
            self.advance()
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "ident" and tok.text in starts:
                return
            self.advance()

    # -- expressions --------------------------------------------------------
    def expr(self):
        left = self.sum()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("<", "<=", ">", ">=", "==", "!="):
            self.advance()
            left = BinOp(tok.text, left, self.sum())
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text in ("<", "<=", ">", ">=", "==", "!="):
                raise _Syntax(Diagnostic("comparisons cannot be chained; add parentheses", self.span(nxt)))
        return left

    def sum(self):
        left = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise _Syntax(Diagnostic(f"number {tok.text} is out of range", self.span(tok)))
            return Num(value)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            self.expect("op", ")")
            return inner
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.advance()
            if self.at("op", "("):
                self.advance()
                args = []
                if not self.at("op", ")"):
                    args.append(self.expr())
                    while self.at("op", ","):
                        self.advance()
                        args.append(self.expr())
                self.expect("op", ")", "')' or ','")
                return Call(tok.text, tuple(args), self.span(tok))
            if tok.text == "t":
                return Time()
            return Var(tok.text, self.span(tok))
        raise self.error("an expression")

    # -- model declarations -------------------------------------------------
    def names(self):
        out = [self.name().text]
        while self.at("op", ","):
            self.advance()
            out.append(self.name().text)
        return tuple(out)

    def declaration(self):
        kw = self.peek()
        if kw.kind != "ident" or kw.text not in KEYWORDS - {"by"}:
            raise self.error("a declaration (stock, flow, aux, const, lookup or delay)")
        self.advance()
        name_tok = self.name()
        span = self.span(name_tok)
        name = name_tok.text
        self.expect("op", "=")
        if kw.text == "const":
            return ConstDef(name, self.number(), span)
        if kw.text == "lookup":
            self.expect("op", "[")
            points = [self.pair()]
            while self.at("op", ","):
                self.advance()
                points.append(self.pair())
            self.expect("op", "]", "']' or ','")
            return LookupDef(name, tuple(points), span)
        value = self.expr()
        if kw.text == "flow":
            return FlowDef(name, value, span=span)
        if kw.text == "aux":
            return AuxDef(name, value, span=span)
        if kw.text == "delay":
            self.expect("ident", "by", "'by'")
            return DelayBlock(name, value, self.number(), span)
        self.expect("op", "{")
        inflows = outflows = ()
        if self.at("ident", "in") and self.peek(1).text == ":":
            self.pos += 2
            inflows = self.names()
        if self.at("ident", "out") and self.peek(1).text == ":":
            self.pos += 2
            outflows = self.names()
        self.expect("op", "}", "'in:', 'out:' or '}'")
        return StockDef(name, value, inflows, outflows, span)

    def pair(self):
        self.expect("op", "(")
        x = self.number()
        self.expect("op", ",")
        y = self.number()
        self.expect("op", ")")
        return (x, y)

    def model_defs(self):
        defs = []
        starts = KEYWORDS - {"by"}
        while not self.at("eof"):
            began = self.pos
            try:
                defs.append(self.declaration())
            except _Syntax as exc:
                self.diags.append(exc.diag)
                self.recover(starts, began)
        return defs


def parse_model(text: str, file: str = "<string>") -> Model:
    """Parse ``.sfm`` source into a validated Model.

    Raises :class:`ParseError` for syntax errors and :class:`ModelError` for
    semantic ones; both carry span-annotated diagnostics.
    """
    p = _Parser(text, file, newlines=False)
    try:
        defs = p.model_defs()
    except RecursionError:
        tok = p.peek()
        raise ParseError([Diagnostic("expression nested too deeply", p.span(tok))]) from None
    if p.diags:
        raise ParseError(p.diags)
    return build_model(defs)


# ---------------------------------------------------------------------------
# Serialization

_PREC = {"<": 1, "<=": 1, ">": 1, ">=": 1, "==": 1, "!=": 1, "+": 2, "-": 2, "*": 3, "/": 3}


def format_number(x: float) -> str:
    """Shortest decimal that reads back to the same float."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Num) and e.value < 0):
        return 4
    return 5


def format_expr(e) -> str:
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Time):
        return "t"
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        return "-" + (f"({inner})" if _prec(e.operand) < 4 else inner)
    if isinstance(e, Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    p = _PREC[e.op]
    left = format_expr(e.left)
    right = format_expr(e.right)
    if _prec(e.left) < p or (p == 1 and _prec(e.left) == 1):
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def serialize_model(model: Model) -> str:
    """Canonical text: declarations grouped by kind, sorted by name, one per line."""
    lines = []
    for c in model.constants:
        lines.append(f"const {c.name} = {format_number(c.value)}")
    for lk in model.lookups:
        pts = ", ".join(f"({format_number(x)}, {format_number(y)})" for x, y in lk.points)
        lines.append(f"lookup {lk.name} = [{pts}]")
    for s in model.stocks:
        body = []
        if s.inflows:
            body.append("in: " + ", ".join(s.inflows))
        if s.outflows:
            body.append("out: " + ", ".join(s.outflows))
        inner = " " + " ".join(body) + " " if body else ""
        lines.append(f"stock {s.name} = {format_expr(s.initial)} {{{inner}}}")
    for f in model.flows:
        lines.append(f"flow {f.name} = {format_expr(f.expr)}")
    for a in model.auxes:
        lines.append(f"aux {a.name} = {format_expr(a.expr)}")
    for d in model.delays:
        lines.append(f"delay {d.name} = {format_expr(d.input)} by {format_number(d.lag)}")
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Scenarios


class Action(enum.Enum):
    SET_CONSTANT = "set-constant"
    STEP_INPUT = "step-input"
    PULSE_INPUT = "pulse-input"
    SWITCH_DECISION = "switch-decision"


_ACTION_WORDS = {"set": Action.SET_CONSTANT, "switch": Action.SWITCH_DECISION,
                 "step": Action.STEP_INPUT, "pulse": Action.PULSE_INPUT}
_GRID_KEYS = {"t0": "t0", "horizon": "horizon", "dt": "dt_internal", "data": "dt_data"}


@dataclass(frozen=True)
class ScenarioEvent:
    at: float
    action: Action
    target: str
    value: float
    duration: float | None = None
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ScenarioDoc:
    """Overlay on a base model: constant overrides, grid overrides and timed events.

    ``grid`` maps TimeGrid field names to values. Events are sorted by time.
    """

    model_ref: str | None = None
    grid: tuple[tuple[str, float], ...] = ()
    params: tuple[tuple[str, float], ...] = ()
    events: tuple[ScenarioEvent, ...] = ()

    @property
    def grid_overrides(self) -> dict[str, float]:
        return dict(self.grid)

    @property
    def param_values(self) -> dict[str, float]:
        return dict(self.params)


def _scenario_statement(p: _Parser, doc: dict):
    kw = p.name("a statement (model, grid, param or at)")
    if kw.text == "model":
        tok = p.expect("string", what="a quoted file name")
        doc["model_ref"] = tok.text[1:-1]
    elif kw.text == "grid":
        seen = 0
        while p.at("ident"):
            key = p.advance()
            if key.text not in _GRID_KEYS:
                raise _Syntax(Diagnostic(f"unknown grid setting {key.text!r} (use t0, horizon, dt, data)",
                                         p.span(key)))
            p.expect("op", "=")
            doc["grid"][_GRID_KEYS[key.text]] = p.number()
            seen += 1
        if not seen:
            raise p.error("a grid setting")
    elif kw.text == "param":
        name = p.name()
        p.expect("op", "=")
        doc["params"][name.text] = p.number()
    elif kw.text == "at":
        at = p.number()
        word = p.name("an action (set, switch, step or pulse)")
        if word.text not in _ACTION_WORDS:
            raise _Syntax(Diagnostic(f"unknown action {word.text!r}", p.span(word)))
        action = _ACTION_WORDS[word.text]
        target = p.name()
        duration = None
        if action in (Action.SET_CONSTANT, Action.SWITCH_DECISION):
            p.expect("op", "=")
            value_tok = p.peek()
            value = p.number()
            if action is Action.SWITCH_DECISION and value not in (0.0, 1.0):
                raise _Syntax(Diagnostic("a decision switch takes 0 or 1", p.span(value_tok)))
        else:
            p.expect("ident", "by", "'by'")
            value = p.number()
            if action is Action.PULSE_INPUT:
                p.expect("ident", "for", "'for'")
                dur_tok = p.peek()
                duration = p.number()
                if duration <= 0:
                    raise _Syntax(Diagnostic("pulse duration must be > 0", p.span(dur_tok)))
        doc["events"].append(ScenarioEvent(at, action, target.text, value, duration, p.span(kw)))
    else:
        raise _Syntax(Diagnostic(f"unknown statement {kw.text!r}", p.span(kw)))
    if not (p.at("nl") or p.at("eof")):
        raise p.error("end of line")


def parse_scenario(text: str, file: str = "<string>") -> ScenarioDoc:
    """Parse ``.sfs`` source. Target names are checked when the overlay is applied."""
    p = _Parser(text, file, newlines=True)
    doc = {"model_ref": None, "grid": {}, "params": {}, "events": []}
    while not p.at("eof"):
        if p.at("nl"):
            p.advance()
            continue
        try:
            _scenario_statement(p, doc)
        except _Syntax as exc:
            p.diags.append(exc.diag)
            while not (p.at("nl") or p.at("eof")):
                p.advance()
    if p.diags:
        raise ParseError(p.diags)
    if "horizon" in doc["grid"] and doc["grid"]["horizon"] <= 0:
        raise ModelError([Diagnostic("grid horizon must be > 0", SourceSpan(file, 1, 1))])
    return ScenarioDoc(
        model_ref=doc["model_ref"],
        grid=tuple(sorted(doc["grid"].items())),
        params=tuple(sorted(doc["params"].items())),
        events=tuple(sorted(doc["events"], key=lambda e: e.at)),
    )


def serialize_scenario(doc: ScenarioDoc) -> str:
    words = {v: k for k, v in _ACTION_WORDS.items()}
    keys = {v: k for k, v in _GRID_KEYS.items()}
    lines = []
    if doc.model_ref is not None:
        lines.append(f'model "{doc.model_ref}"')
    if doc.grid:
        lines.append("grid " + " ".join(f"{keys[k]} = {format_number(v)}" for k, v in doc.grid))
    for name, value in doc.params:
        lines.append(f"param {name} = {format_number(value)}")
    for e in doc.events:
        head = f"at {format_number(e.at)} {words[e.action]} {e.target}"
        if e.action in (Action.SET_CONSTANT, Action.SWITCH_DECISION):
            lines.append(f"{head} = {format_number(e.value)}")
        elif e.action is Action.STEP_INPUT:
            lines.append(f"{head} by {format_number(e.value)}")
        else:
            lines.append(f"{head} by {format_number(e.value)} for {format_number(e.duration)}")
    return "".join(line + "\n" for line in lines)
