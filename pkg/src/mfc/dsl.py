"""Tokenizer and parsers for the session language.

Expressions are parsed straight into :class:`SeriesElement` values against
an environment mapping identifiers to series.  Statements are parsed into
small tuples that :mod:`mfc.cli` executes in order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping

from mfc.ring import HBAR, I, SeriesElement


class ParseError(Exception):
    """Syntax error; the message carries ``line:col``."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: syntax error: {msg}" if line else f"syntax error: {msg}")
        self.line = line
        self.col = col


class SemanticError(Exception):
    """Unknown names, unknown coordinates, duplicate declarations."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, ID, OP, NL, EOF
    text: str
    line: int
    col: int
    pos: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)|(?P<nl>\n)|(?P<num>\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|[-+*/^()\[\]{},;:=|])"
)
_OPEN = {"(": ")", "[": "]", "{": "}"}


def tokenize(text: str) -> list:
    """Split ``text`` into tokens.

    Newlines are significant at the top level and directly inside braces,
    where they separate statements and entries; inside parentheses and
    brackets they are ignored.
    """
    out = []
    stack: list = []
    line, lstart, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - lstart + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            if not stack or stack[-1][0] == "{":
                out.append(Token("NL", "\n", line, col, pos))
            line += 1
            lstart = m.end()
        elif kind == "num":
            out.append(Token("NUM", s, line, col, pos))
        elif kind == "id":
            out.append(Token("ID", s, line, col, pos))
        elif kind == "op":
            if s in _OPEN:
                stack.append((s, line, col))
            elif s in (")", "]", "}"):
                if not stack or _OPEN[stack[-1][0]] != s:
                    raise ParseError(f"unbalanced {s!r}", line, col)
                stack.pop()
            out.append(Token("OP", s, line, col, pos))
        pos = m.end()
    if stack:
        s, ol, oc = stack[-1]
        raise ParseError(f"unclosed {s!r}", ol, oc)
    out.append(Token("EOF", "", line, pos - lstart + 1, pos))
    return out


class Cursor:
    """Token stream with one-token lookahead."""

    def __init__(self, tokens: list, text: str = ""):
        self.tokens = tokens
        self.i = 0
        self.text = text

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "ID") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def ident(self, what: str = "a name") -> Token:
        if self.tok.kind != "ID":
            self.error(f"expected {what}")
        return self.next()

    def integer(self) -> int:
        neg = self.accept("-")
        if self.tok.kind != "NUM":
            self.error("expected an integer")
        v = int(self.next().text)
        return -v if neg else v

    def skip_newlines(self):
        while self.tok.kind == "NL":
            self.next()

    def at_end_of_statement(self) -> bool:
        return self.tok.kind in ("NL", "EOF") or self.at(";")

    def error(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else ("end of line" if t.kind == "NL" else repr(t.text))
        raise ParseError(f"{msg}, found {found}", t.line, t.col)


# -- expressions --------------------------------------------------------------

JetHook = Callable[[Token, Cursor], SeriesElement]


class ExprParser:
    """Recursive descent over ``+ - * / ^``, parentheses, integers, ``i`` and names.

    ``env`` maps identifiers to series; ``hbar`` and ``i`` are always known.
    ``jet`` optionally handles ``name[...]`` forms.
    """

    def __init__(self, env: Mapping, jet: Mapping | None = None, unknown: str = "unknown name"):
        self.env = env
        self.jet = jet or {}
        self.unknown = unknown

    def parse(self, cur: Cursor) -> SeriesElement:
        return self.sum(cur)

    def sum(self, cur: Cursor) -> SeriesElement:
        if cur.accept("-"):
            acc = -self.product(cur)
        else:
            cur.accept("+")
            acc = self.product(cur)
        while True:
            if cur.accept("+"):
                acc = acc + self.product(cur)
            elif cur.accept("-"):
                acc = acc - self.product(cur)
            else:
                return acc

    def product(self, cur: Cursor) -> SeriesElement:
        acc = self.power(cur)
        while True:
            if cur.accept("*"):
                acc = acc * self.power(cur)
            elif cur.at("/"):
                t = cur.next()
                d = self.power(cur)
                if d.is_zero():
                    raise ParseError("division by zero", t.line, t.col)
                acc = acc / d
            else:
                return acc

    def power(self, cur: Cursor) -> SeriesElement:
        base = self.atom(cur)
        if cur.accept("^"):
            base = base ** cur.integer()
        return base

    def atom(self, cur: Cursor) -> SeriesElement:
        t = cur.tok
        if t.kind == "NUM":
            cur.next()
            return SeriesElement.constant(int(t.text))
        if cur.accept("("):
            v = self.sum(cur)
            cur.expect(")")
            return v
        if cur.accept("-"):
            return -self.power(cur)
        if t.kind == "ID":
            cur.next()
            if t.text in self.jet and cur.at("["):
                return self.jet[t.text](t, cur)
            if t.text in self.env:
                return self.env[t.text]
            if t.text == "hbar":
                return SeriesElement.var(HBAR)
            if t.text == "i":
                return SeriesElement.constant(I)
            raise SemanticError(f"{self.unknown} {t.text!r}", t.line, t.col)
        cur.error("expected an expression")


def space_env(space, target=None) -> dict:
    env = {x.name: SeriesElement.var(x) for x in space.positions}
    if target is not None:
        env.update({p.name: SeriesElement.var(p) for p in target.momenta})
    return env


def parse_expression(text: str, env: Mapping, jet: Mapping | None = None) -> SeriesElement:
    """Parse a complete expression string."""
    toks = [t for t in tokenize(text) if t.kind != "NL"]
    cur = Cursor(toks, text)
    v = ExprParser(env, jet).parse(cur)
    if cur.tok.kind != "EOF":
        cur.error("unexpected input after expression")
    return v


def coordinate_list(cur: Cursor, space) -> tuple:
    """``[y1,y1,y2]`` -> multi-index over ``space`` (brackets already positioned)."""
    cur.expect("[")
    alpha = [0] * space.dim
    while not cur.at("]"):
        t = cur.ident("a coordinate")
        if t.text not in space.coords:
            raise SemanticError(f"unknown coordinate {t.text!r} of {space.name}", t.line, t.col)
        alpha[space.coords.index(t.text)] += 1
        if not cur.accept(","):
            break
    cur.expect("]")
    return tuple(alpha)


def entries(cur: Cursor, entry: Callable):
    """Parse ``{ entry (; entry)* }`` with newlines allowed as separators."""
    cur.expect("{")
    while True:
        while cur.tok.kind == "NL" or cur.at(";"):
            cur.next()
        if cur.accept("}"):
            return
        entry(cur)
        if not (cur.tok.kind == "NL" or cur.at(";") or cur.at("}")):
            cur.error("expected ';' or '}'")


def parse_map_body(cur: Cursor, source, target) -> tuple:
    """``{ y1 = expr; y2 = expr }`` -> component tuple in target order."""
    comps: dict = {}
    env = space_env(source)

    def entry(c: Cursor):
        t = c.ident("a coordinate")
        if t.text not in target.coords:
            raise SemanticError(f"unknown coordinate {t.text!r} of {target.name}", t.line, t.col)
        if t.text in comps:
            raise SemanticError(f"component {t.text!r} given twice", t.line, t.col)
        c.expect("=")
        comps[t.text] = ExprParser(env).parse(c)

    start = cur.tok
    entries(cur, entry)
    missing = [y for y in target.coords if y not in comps]
    if missing:
        raise SemanticError(f"dimension mismatch: missing component {missing[0]!r}", start.line, start.col)
    return tuple(comps[y] for y in target.coords)


def parse_operator_body(cur: Cursor, carrier) -> tuple:
    """Entries ``d[..]: expr`` (derivative basis), ``p[..]: expr`` (p-hat basis), ``phase: expr``.

    Returns (dcoeffs, pcoeffs, phase).
    """
    src, tgt = carrier.source, carrier.target
    env = space_env(src)
    d: dict = {}
    p: dict = {}
    phase = [None]

    def entry(c: Cursor):
        t = c.ident("'d', 'p' or 'phase'")
        if t.text == "phase":
            c.expect(":")
            phase[0] = ExprParser(env).parse(c)
            return
        if t.text not in ("d", "p"):
            raise ParseError(f"expected 'd[...]', 'p[...]' or 'phase', found {t.text!r}", t.line, t.col)
        alpha = coordinate_list(c, tgt)
        c.expect(":")
        table = d if t.text == "d" else p
        v = ExprParser(env).parse(c)
        table[alpha] = table[alpha] + v if alpha in table else v

    entries(cur, entry)
    return d, p, phase[0]


def parse_map_text(text: str, source, target):
    """Inverse of ``str(PolyMap)``."""
    from mfc.geometry import PolyMap

    cur = Cursor(tokenize(text), text)
    cur.skip_newlines()
    comps = parse_map_body(cur, source, target)
    cur.skip_newlines()
    if cur.tok.kind != "EOF":
        cur.error("unexpected input after map")
    return PolyMap(source, target, comps)


def parse_operator_text(text: str, source, target):
    """Inverse of ``str(HbarOperator)``: ``[exp(i/hbar*(T)) *] { d[..]: c; ... } over { map }``."""
    from mfc.geometry import PolyMap
    from mfc.hbar import HbarOperator

    cur = Cursor([t for t in tokenize(text) if t.kind != "NL"], text)
    phase = None
    if cur.at("exp"):
        cur.next()
        for s in ("(", "i", "/", "hbar", "*", "("):
            cur.expect(s)
        phase = ExprParser(space_env(source)).parse(cur)
        cur.expect(")")
        cur.expect(")")
        cur.expect("*")
    # the carrier comes after the coefficients, so scan ahead for it
    depth, j = 0, cur.i
    while True:
        t = cur.tokens[j]
        if t.kind == "EOF":
            cur.error("expected 'over'")
        if t.text == "{":
            depth += 1
        elif t.text == "}":
            depth -= 1
        elif t.kind == "ID" and t.text == "over" and depth == 0:
            break
        j += 1
    mcur = Cursor(cur.tokens[j + 1:], text)
    carrier = PolyMap(source, target, parse_map_body(mcur, source, target))
    if mcur.tok.kind != "EOF":
        mcur.error("unexpected input after operator")
    d, p, ph = parse_operator_body(cur, carrier)
    if not cur.at("over"):
        cur.error("expected 'over'")
    L = HbarOperator(carrier, d, None, phase if phase is not None else ph)
    if p:
        L = L + HbarOperator.from_pbasis(carrier, p, None, L.phase)
    return L
