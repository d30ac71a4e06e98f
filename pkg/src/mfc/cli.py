"""Session language driver and the ``mfc`` command.

A session is a sequence of declarations and commands separated by ``;`` or
newlines.  Declarations bind names (one namespace per kind); commands print
their result in canonical form.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Callable

from mfc import diffop, geometry, hbar, micro, symbols
from mfc.diffop import NonlinearOperatorOverMap, OperatorOverMap, jet_var
from mfc.dsl import (
    Cursor,
    ExprParser,
    ParseError,
    SemanticError,
    Token,
    coordinate_list,
    entries,
    parse_map_body,
    parse_operator_body,
    space_env,
    tokenize,
)
from mfc.errors import MathDomainError, SpaceMismatch, UnknownVariable
from mfc.geometry import Connection, CoordinateChange, PolyMap, Space
from mfc.hbar import HbarOperator, NotHomogeneous
from mfc.micro import GeneratingFunction, MicromorphismData
from mfc.ring import HBAR, SeriesElement
from mfc.symbols import CommSquare, SymbolFunction

EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC, EXIT_MATH, EXIT_FAIL = 0, 2, 3, 4, 5

DEFAULTS = {"Nh": 4, "Np": 6, "Nv": 6, "Nx": 6}

KINDS = ("space", "map", "fn", "sym", "op", "vf", "nlop", "conn", "gen", "micro", "square")


@dataclass
class Function:
    space: Space
    series: SeriesElement

    def __str__(self):
        return str(self.series)


@dataclass
class Symbol:
    """A symbol over a (possibly hbar-perturbed) map; converted on demand."""

    base: PolyMap
    series: SeriesElement

    def classical(self) -> SymbolFunction:
        return SymbolFunction(self.base, self.series)

    def __str__(self):
        return str(self.series)


@dataclass
class Result:
    text: str
    value: object = None
    kind: str | None = None
    failed: bool = False


@dataclass
class Session:
    tables: dict = field(default_factory=lambda: {k: {} for k in KINDS})
    config: dict = field(default_factory=lambda: dict(DEFAULTS))

    def bind(self, kind: str, tok: Token, value):
        if tok.text in self.tables[kind]:
            raise SemanticError(f"duplicate {kind} name {tok.text!r}", tok.line, tok.col)
        self.tables[kind][tok.text] = value

    def lookup(self, kinds: str, tok: Token):
        for kind in kinds.split("|"):
            if tok.text in self.tables[kind]:
                return kind, self.tables[kind][tok.text]
        raise SemanticError(f"unknown {kinds.replace('|', ' or ')} {tok.text!r}", tok.line, tok.col)

    def get(self, kinds: str, tok: Token):
        return self.lookup(kinds, tok)[1]

    def space(self, tok: Token) -> Space:
        return self.get("space", tok)

    def mapref(self, cur: Cursor) -> PolyMap:
        """A declared map name or ``id(M)``."""
        t = cur.ident("a map")
        if t.text == "id" and cur.at("("):
            cur.next()
            sp = self.space(cur.ident("a space"))
            cur.expect(")")
            return PolyMap.identity(sp)
        return self.get("map", t)


# -- declarations ---------------------------------------------------------------


def _decl_space(s: Session, cur: Cursor):
    name = cur.ident("a space name")
    cur.expect("dim")
    t = cur.tok
    dim = cur.integer()
    cur.expect("coords")
    coords = []
    while cur.tok.kind == "ID":
        coords.append(cur.next().text)
    if len(coords) != dim:
        raise SemanticError(f"dimension mismatch: dim {dim} but {len(coords)} coordinates", t.line, t.col)
    if dim < 1:
        raise SemanticError("a space needs at least one coordinate", t.line, t.col)
    if len(set(coords)) != dim:
        raise SemanticError("coordinate names must be distinct", t.line, t.col)
    s.bind("space", name, Space(name.text, tuple(coords)))


def _decl_map(s: Session, cur: Cursor):
    name = cur.ident("a map name")
    cur.expect(":")
    src = s.space(cur.ident("a space"))
    cur.expect("->")
    tgt = s.space(cur.ident("a space"))
    s.bind("map", name, PolyMap(src, tgt, parse_map_body(cur, src, tgt)))


def _decl_fn(s: Session, cur: Cursor):
    name = cur.ident("a function name")
    cur.expect("on")
    sp = s.space(cur.ident("a space"))
    cur.expect("=")
    s.bind("fn", name, Function(sp, sp.function(ExprParser(space_env(sp)).parse(cur))))


def _decl_sym(s: Session, cur: Cursor):
    name = cur.ident("a symbol name")
    cur.expect("over")
    base = s.mapref(cur)
    cur.expect("=")
    v = ExprParser(space_env(base.source, base.target)).parse(cur)
    s.bind("sym", name, Symbol(base, v.with_variables(base.source.positions + base.target.momenta)))


def _decl_op(s: Session, cur: Cursor):
    name = cur.ident("an operator name")
    cur.expect("over")
    carrier = s.mapref(cur)
    nh = None
    if cur.accept("nh"):
        nh = cur.integer()
    d, p, phase = parse_operator_body(cur, carrier)
    L = HbarOperator(carrier, d, nh, phase)
    if p:
        L = L + HbarOperator.from_pbasis(carrier, p, nh, phase)
    s.bind("op", name, L)


def _expr_list(cur: Cursor, env) -> list:
    cur.expect("[")
    out = []
    while not cur.at("]"):
        out.append(ExprParser(env).parse(cur))
        if not cur.accept(","):
            break
    cur.expect("]")
    return out


def _decl_vf(s: Session, cur: Cursor):
    name = cur.ident("a vector field name")
    cur.expect("over")
    carrier = s.mapref(cur)
    cur.expect("=")
    s.bind("vf", name, diffop.vector_field_over_map(_expr_list(cur, space_env(carrier.source)), carrier))


def _decl_nlop(s: Session, cur: Cursor):
    name = cur.ident("an operator name")
    cur.expect("over")
    carrier = s.mapref(cur)
    cur.expect("=")
    tgt = carrier.target

    def jet(tok: Token, c: Cursor):
        return SeriesElement.var(jet_var(tgt, coordinate_list(c, tgt)))

    poly = ExprParser(space_env(carrier.source), {"g": jet}).parse(cur)
    s.bind("nlop", name, NonlinearOperatorOverMap(carrier, poly))


def _decl_conn(s: Session, cur: Cursor):
    name = cur.ident("a connection name")
    cur.expect("on")
    sp = s.space(cur.ident("a space"))
    table: dict = {}

    def index(c: Cursor) -> int:
        t = c.tok
        if t.kind == "NUM":
            k = int(c.next().text)
            if not 1 <= k <= sp.dim:
                raise SemanticError(f"index {k} out of range 1..{sp.dim}", t.line, t.col)
            return k - 1
        t = c.ident("an index")
        if t.text not in sp.coords:
            raise SemanticError(f"unknown coordinate {t.text!r} of {sp.name}", t.line, t.col)
        return sp.coords.index(t.text)

    def entry(c: Cursor):
        c.ident("a Christoffel symbol")
        c.expect("[")
        k = index(c)
        c.expect(",")
        i = index(c)
        c.expect(",")
        j = index(c)
        c.expect("]")
        c.expect("=")
        table[(k, i, j)] = ExprParser(space_env(sp)).parse(c)

    entries(cur, entry)
    s.bind("conn", name, Connection(sp, table))


def _decl_gen(s: Session, cur: Cursor):
    name = cur.ident("a generating function name")
    cur.expect(":")
    src = s.space(cur.ident("a space"))
    cur.expect("->")
    tgt = s.space(cur.ident("a space"))
    parts: dict = {}

    def entry(c: Cursor):
        t = c.ident("S0, phi, Splus or S")
        if t.text not in ("S0", "phi", "Splus", "S") or t.text in parts:
            raise SemanticError(f"unexpected entry {t.text!r}", t.line, t.col)
        c.expect("=")
        if t.text == "phi":
            if c.at("["):
                parts["phi"] = PolyMap(src, tgt, tuple(_expr_list(c, space_env(src))))
            else:
                m = s.mapref(c)
                if m.source != src or m.target != tgt:
                    raise SpaceMismatch(f"space mismatch: phi must map {src.name} -> {tgt.name}")
                parts["phi"] = m
        elif t.text == "S0":
            parts["S0"] = src.function(ExprParser(space_env(src)).parse(c))
        else:
            parts[t.text] = ExprParser(space_env(src, tgt)).parse(c)

    start = cur.tok
    entries(cur, entry)
    if "S" in parts:
        if len(parts) > 1:
            raise SemanticError("give either S or its parts S0, phi, Splus", start.line, start.col)
        g = GeneratingFunction.decompose(parts["S"], src, tgt)
    else:
        if "phi" not in parts:
            raise SemanticError("generating function needs phi", start.line, start.col)
        zero = SeriesElement.zero(src.positions)
        g = GeneratingFunction(parts.get("S0", zero), parts["phi"], parts.get("Splus", zero))
    s.bind("gen", name, g)


def _decl_micro(s: Session, cur: Cursor):
    name = cur.ident("a micromorphism name")
    cur.expect("over")
    carrier = s.mapref(cur)
    parts: dict = {}

    def entry(c: Cursor):
        t = c.ident("Splus, H or conn")
        if t.text not in ("Splus", "H", "conn") or t.text in parts:
            raise SemanticError(f"unexpected entry {t.text!r}", t.line, t.col)
        c.expect("=")
        if t.text == "conn":
            parts["conn"] = s.get("conn", c.ident("a connection"))
        else:
            parts[t.text] = ExprParser(space_env(carrier.source, carrier.target)).parse(c)

    entries(cur, entry)
    s.bind("micro", name, MicromorphismData(
        carrier, parts.get("Splus", SeriesElement.zero()), parts.get("H", SeriesElement.constant(1)), parts.get("conn")
    ))


def _decl_square(s: Session, cur: Cursor):
    name = cur.ident("a square name")
    parts: dict = {}

    def entry(c: Cursor):
        t = c.ident("L12, L34, K13 or K24")
        if t.text not in ("L12", "L34", "K13", "K24") or t.text in parts:
            raise SemanticError(f"unexpected entry {t.text!r}", t.line, t.col)
        c.expect("=")
        parts[t.text] = s.get("op", c.ident("an operator"))

    start = cur.tok
    entries(cur, entry)
    missing = [k for k in ("L12", "L34", "K13", "K24") if k not in parts]
    if missing:
        raise SemanticError(f"square needs {missing[0]}", start.line, start.col)
    s.bind("square", name, CommSquare(parts["L12"], parts["L34"], parts["K13"], parts["K24"]))


def _decl_set(s: Session, cur: Cursor):
    t = cur.ident("a setting")
    if t.text not in DEFAULTS:
        raise SemanticError(f"unknown setting {t.text!r} (expected one of {', '.join(DEFAULTS)})", t.line, t.col)
    v = cur.integer()
    if v < 0:
        raise SemanticError("truncation orders are nonnegative", t.line, t.col)
    s.config[t.text] = v


DECLARATIONS = {
    "space": _decl_space,
    "map": _decl_map,
    "fn": _decl_fn,
    "sym": _decl_sym,
    "op": _decl_op,
    "vf": _decl_vf,
    "nlop": _decl_nlop,
    "conn": _decl_conn,
    "gen": _decl_gen,
    "micro": _decl_micro,
    "square": _decl_square,
    "set": _decl_set,
}


# -- commands -------------------------------------------------------------------


@dataclass(frozen=True)
class Verb:
    name: str
    args: tuple  # kind specs; a trailing "?" marks an optional argument
    run: Callable
    uses: tuple  # module operations reached through this verb
    help: str = ""


VERBS: dict = {}


def verb(name: str, *args: str, uses: tuple = (), help: str = ""):
    def deco(fn):
        VERBS[name] = Verb(name, args, fn, uses, help)
        return fn

    return deco


def _as_hbar(L) -> HbarOperator:
    return HbarOperator.from_classical(L) if isinstance(L, OperatorOverMap) else L


def _as_classical(L) -> OperatorOverMap:
    if isinstance(L, OperatorOverMap):
        return L
    if L.phase is not None or not L.carrier.is_classical or any(HBAR in c.free_variables() for c in L.dcoeffs.values()):
        raise ValueError("operator depends on hbar; use hbar-order")
    return OperatorOverMap(L.carrier, L.dcoeffs)


def _fn_on(f: Function, sp: Space, what: str) -> SeriesElement:
    if f.space != sp:
        raise SpaceMismatch(f"space mismatch: {what} expects a function on {sp.name}, got one on {f.space.name}")
    return f.series


def _op_result(L) -> Result:
    return Result(str(L), L, "op")


def _symbol_result(base: PolyMap, series: SeriesElement) -> Result:
    return Result(str(series), Symbol(base, series), "sym")


def _pass(ok) -> str:
    return "PASS" if ok else "FAIL"


@verb("apply", "op|vf", "fn", uses=(hbar.hbar_apply, diffop.apply), help="apply an operator to a function")
def _v_apply(s, L, g):
    if isinstance(L, OperatorOverMap):
        r = diffop.apply(L, _fn_on(g, L.target, "apply"))
    else:
        r = hbar.hbar_apply(L, _fn_on(g, L.target, "apply"))
    return Result(str(r), Function(L.source, r), "fn")


@verb("compose", "op|vf", "op|vf", uses=(hbar.hbar_compose, diffop.compose), help="L o K")
def _v_compose(s, L, K):
    if isinstance(L, OperatorOverMap) and isinstance(K, OperatorOverMap):
        return _op_result(HbarOperator.from_classical(diffop.compose(L, K)))
    return _op_result(hbar.hbar_compose(_as_hbar(L), _as_hbar(K)))


@verb("order", "op|vf", "int?", uses=(diffop.order_oracle,), help="coefficient order, or the commutator test for order <= k")
def _v_order(s, L, k=None):
    C = _as_classical(L)
    if k is None:
        return Result(str(C.order))
    return Result("true" if diffop.order_oracle(C, k) else "false")


@verb("hbar-order", "op", "int?", uses=(hbar.hbar_order_oracle,), help="smallest k passing the hbar commutator test, or the test for k")
def _v_hbar_order(s, L, k=None):
    if k is not None:
        return Result("true" if hbar.hbar_order_oracle(L, k) else "false")
    for j in range(-1, L.order + 1):
        if hbar.hbar_order_oracle(L, j):
            return Result(str(j))
    raise MathDomainError("not-in-symbol-class: no finite hbar-order up to the coefficient order")


@verb("degree", "op", uses=(hbar.degree, hbar.graded_components), help="degree of a homogeneous operator")
def _v_degree(s, L):
    return Result(str(hbar.degree(L)))


@verb("components", "op", uses=(hbar.graded_components,), help="homogeneous components by degree")
def _v_components(s, L):
    return Result("\n".join(f"[{k}] {c}" for k, c in hbar.graded_components(L).items()) or "0")


@verb("symb", "op", uses=(hbar.principal_symbol,), help="principal symbol")
def _v_symb(s, L):
    H = hbar.principal_symbol(L)
    return _symbol_result(H.base, H.series)


@verb("fullsymb", "op", "word?", uses=(hbar.full_symbol, hbar.full_symbol_basis, hbar.full_symbol_planewave),
      help="full symbol (method basis, planewave or both)")
def _v_fullsymb(s, L, method="both"):
    if method not in ("basis", "planewave", "both"):
        raise SemanticError(f"unknown method {method!r}")
    return _symbol_result(L.carrier, hbar.full_symbol(L, method))


@verb("push", "sym", "map", uses=(symbols.pushforward,), help="push a symbol forward along a map")
def _v_push(s, H, psi):
    r = symbols.pushforward(H.classical(), psi)
    return _symbol_result(r.base, r.series)


@verb("pull", "sym", "map", uses=(symbols.pullback_symbol,), help="pull a symbol back along a map")
def _v_pull(s, F, f):
    r = symbols.pullback_symbol(F.classical(), f)
    return _symbol_result(r.base, r.series)


@verb("symbprod", "sym", "sym", uses=(symbols.symbol_product,), help="product of symbols over a chain of maps")
def _v_symbprod(s, H, F):
    r = symbols.symbol_product(H.classical(), F.classical())
    return _symbol_result(r.base, r.series)


@verb("symbprod-check", "op", "op", uses=(symbols.check_symbprod,), help="symb(L o K) = symb(L) * symb(K)")
def _v_symbprod_check(s, L, K):
    r = symbols.check_symbprod(L, K)
    text = f"{_pass(r.ok)}\nsymb(L o K) = {r.lhs}\nsymb(L) * symb(K) = {r.rhs}"
    return Result(text, failed=not r.ok)


@verb("square-delta", "square", uses=(symbols.square_delta,), help="L12 o K24 - K13 o L34")
def _v_square_delta(s, Q):
    return _op_result(symbols.square_delta(Q))


@verb("square-bracket", "square", uses=(symbols.square_bracket, symbols.matching_conditions), help="bracket of a square")
def _v_square_bracket(s, Q):
    first, second = symbols.matching_conditions(Q)
    lines = [f"matching H: {_pass(first)}", f"matching F: {_pass(second)}"]
    if not (first and second):
        return Result("FAIL\n" + "\n".join(lines), failed=True)
    delta = symbols.square_delta(Q)
    zero = hbar.principal_symbol(delta).series.is_zero()
    v = delta.hbar_valuation()
    div = v is None or v >= 1
    lines += [f"Delta = {delta}", f"symb(Delta) = 0: {_pass(zero)}", f"hbar divides Delta: {_pass(div)}"]
    ok = zero and div
    if ok:
        b = symbols.square_bracket(Q)
        lines.append(f"bracket = {b}")
        return Result("PASS\n" + "\n".join(lines), Symbol(b.base, b.series), "sym")
    return Result("FAIL\n" + "\n".join(lines), failed=True)


@verb("thick", "gen", uses=(micro.thick_pullback,), help="quantum thick pullback at the session Nh")
def _v_thick(s, S):
    return _op_result(micro.thick_pullback(S, s.config["Nh"]))


@verb("invthick", "gen", "conn", uses=(micro.invariant_thick_pullback,), help="invariant thick pullback with a connection")
def _v_invthick(s, S, G):
    return _op_result(micro.invariant_thick_pullback(S.s0, S.splus, S.phi, G, s.config["Nh"]))


@verb("microquant", "micro", uses=(micro.quantize_micromorphism,), help="quantize micromorphism data")
def _v_microquant(s, Q):
    return _op_result(micro.quantize_micromorphism(Q, s.config["Nh"]))


@verb("micro-roundtrip", "op", uses=(micro.micromorphism_from_operator, micro.quantize_micromorphism),
      help="extract data from an operator and quantize it again")
def _v_micro_roundtrip(s, L):
    d = micro.micromorphism_from_operator(L)
    back = micro.quantize_micromorphism(d, L.nh)
    ok = back == L
    text = f"{_pass(ok)}\nSbar+ = {d.sbar_plus}\nH = {d.amplitude}\nphi = {d.carrier}"
    return Result(text, d, "micro", failed=not ok)


@verb("thick-symbols", "gen", "sym?", uses=(micro.thick_symbol_of_operator_over_thick, micro.operator_over_thick),
      help="the two candidate symbols H and H*exp((i/hbar) S+)")
def _v_thick_symbols(s, S, H=None):
    amp = SeriesElement.constant(1) if H is None else H.series
    a, b = micro.thick_symbol_of_operator_over_thick(S.splus, amp, s.config["Nh"], s.config["Np"])
    return Result(f"H = {a}\nH*exp((i/hbar)*Splus) = {b}")


@verb("expmap", "conn", uses=(geometry.exp_map,), help="geodesic exponential map to velocity order Nv")
def _v_expmap(s, G):
    E = geometry.exp_map(G, s.config["Nv"])
    return Result("{ " + "; ".join(f"{y} = {c}" for y, c in zip(G.space.coords, E.components)) + " }")


@verb("change-coords", "op", "word", "map", uses=(hbar.transform_coordinates,),
      help="rewrite an operator under a coordinate change on its source or target")
def _v_change_coords(s, L, side, C):
    if side not in ("source", "target"):
        raise SemanticError(f"expected 'source' or 'target', got {side!r}")
    change = CoordinateChange(C, s.config["Nx"])
    if side == "target":
        return _op_result(hbar.transform_coordinates(L, target=change))
    return _op_result(hbar.transform_coordinates(L, source=change))


@verb("jet-invert", "map", uses=(geometry.CoordinateChange,), help="inverse of an invertible jet to order Nx")
def _v_jet_invert(s, m):
    inv = CoordinateChange(m, s.config["Nx"]).inverse
    return Result(str(inv), inv, "map")


@verb("jacobian", "map", uses=(geometry.jacobian,), help="Jacobian matrix")
def _v_jacobian(s, f):
    return Result("\n".join("[" + ", ".join(str(e) for e in row) + "]" for row in geometry.jacobian(f)))


@verb("compose-maps", "map", "map", uses=(geometry.compose_maps,), help="g o f for f then g")
def _v_compose_maps(s, f, g):
    m = geometry.compose_maps(f, g)
    return Result(str(m), m, "map")


@verb("pullback", "map", "fn", uses=(geometry.pullback_function,), help="g o f")
def _v_pullback(s, f, g):
    r = geometry.pullback_function(f, _fn_on(g, f.target, "pullback"))
    return Result(str(r), Function(f.source, r), "fn")


@verb("diff", "fn", "word", uses=(SeriesElement.differentiate,), help="partial derivative in a coordinate")
def _v_diff(s, g, coord):
    k = g.space.index_of(coord)
    r = g.series.differentiate(g.space.position(k))
    return Result(str(r), Function(g.space, r), "fn")


@verb("relations", "vf", "fn", uses=(diffop.generator_relation_check,), help="generator relations for a vector field")
def _v_relations(s, Y, g):
    r = diffop.generator_relation_check(Y, _fn_on(g, Y.target, "relations"))
    text = f"{_pass(r)}\nY o g = phi*(g) Y + Y(g): {_pass(r.heisenberg)}\n" \
           f"phi* o g = phi*(g) phi*: {_pass(r.pullback)}\nLeibniz: {_pass(r.leibniz)}"
    return Result(text, failed=not r)


@verb("nlapply", "nlop", "fn", uses=(diffop.nonlinear_apply,), help="apply a non-linear operator")
def _v_nlapply(s, P, g):
    r = diffop.nonlinear_apply(P, _fn_on(g, P.carrier.target, "nlapply"))
    return Result(str(r), Function(P.carrier.source, r), "fn")


@verb("nlderiv", "nlop", "fn", "fn", uses=(diffop.nonlinear_derivative,), help="derivative of P at g along h")
def _v_nlderiv(s, P, g, h):
    t = P.carrier.target
    r = diffop.nonlinear_derivative(P, _fn_on(g, t, "nlderiv"), _fn_on(h, t, "nlderiv"))
    return Result(str(r), Function(P.carrier.source, r), "fn")


@verb("nlhom", "nlop", "fn", "fn", "fn", uses=(diffop.derivative_is_homomorphism,),
      help="is the derivative at g multiplicative on h1, h2")
def _v_nlhom(s, P, g, h1, h2):
    t = P.carrier.target
    ok = diffop.derivative_is_homomorphism(P, *(_fn_on(f, t, "nlhom") for f in (g, h1, h2)))
    return Result("true" if ok else "false")


@verb("show", "any", uses=(), help="print a declared value")
def _v_show(s, value):
    return Result(str(value))


def _resolve(s: Session, kind: str, tok: Token):
    if kind == "int":
        if tok.kind != "NUM":
            raise ParseError("expected an integer", tok.line, tok.col)
        return int(tok.text)
    if kind == "word":
        return tok.text
    if kind == "any":
        return s.lookup("|".join(KINDS), tok)[1]
    return s.get(kind, tok)


def _read_verb(cur: Cursor) -> Token:
    """Verb names may contain hyphens (``hbar-order``)."""
    t = cur.ident("a declaration or command")
    text = t.text
    while cur.at("-") and cur.tok.pos == t.pos + len(text) and cur.peek().kind == "ID" \
            and cur.peek().pos == cur.tok.pos + 1:
        cur.next()
        text += "-" + cur.next().text
    return Token("ID", text, t.line, t.col, t.pos)


def run_command(s: Session, cur: Cursor, vt: Token | None = None) -> Result:
    if vt is None:
        vt = _read_verb(cur)
    v = VERBS.get(vt.text)
    if v is None:
        raise SemanticError(f"unknown command {vt.text!r}", vt.line, vt.col)
    args = []
    for kind in v.args:
        optional = kind.endswith("?")
        kind = kind.rstrip("?")
        if cur.at_end_of_statement():
            if optional:
                break
            cur.error(f"{v.name} expects {len([a for a in v.args if not a.endswith('?')])} arguments")
        tok = cur.tok
        if kind == "int":
            neg = cur.accept("-")
            tok = cur.next()
            if tok.kind != "NUM":
                raise ParseError("expected an integer", tok.line, tok.col)
            args.append(-int(tok.text) if neg else int(tok.text))
            continue
        if tok.kind != "ID":
            cur.error("expected a name")
        cur.next()
        args.append(_resolve(s, kind, tok))
    if not cur.at_end_of_statement():
        cur.error(f"too many arguments for {v.name}")
    return v.run(s, *args)


# -- driver -----------------------------------------------------------------------


def execute(text: str, session: Session | None = None, echo: bool = True, out=None):
    """Run every statement of ``text``; return (session, exit status, printed lines)."""
    s = session if session is not None else Session()
    cur = Cursor(tokenize(text), text)
    lines: list = []
    failed = False
    while True:
        while cur.tok.kind == "NL" or cur.at(";"):
            cur.next()
        if cur.tok.kind == "EOF":
            break
        start = cur.tok
        head = _read_verb(cur)
        if head.text in DECLARATIONS:
            DECLARATIONS[head.text](s, cur)
        elif head.text == "let":
            name = cur.ident("a name")
            cur.expect("=")
            r = run_command(s, cur)
            if r.kind is None:
                raise SemanticError("this command does not produce a value", name.line, name.col)
            s.bind(r.kind, name, r.value)
        else:
            r = run_command(s, cur, head)
            if echo:
                last = cur.tokens[cur.i - 1]
                lines.append("> " + " ".join(text[start.pos:last.pos + len(last.text)].split()))
            lines.extend(r.text.split("\n"))
            failed = failed or r.failed
            if out is not None:
                out.write("\n".join(lines) + "\n")
                lines = []
        if not cur.at_end_of_statement():
            cur.error("expected end of statement")
    return s, (EXIT_FAIL if failed else EXIT_OK), lines


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, (ArithmeticError, NotHomogeneous)):
        return EXIT_MATH
    if isinstance(exc, (SemanticError, SpaceMismatch, UnknownVariable, KeyError, IndexError, ValueError)):
        return EXIT_SEMANTIC
    raise exc


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _guard(fn) -> int:
    try:
        return fn()
    except (ParseError, SemanticError, MathDomainError, ArithmeticError, ValueError, KeyError, IndexError) as exc:
        code = exit_code_for(exc)
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return code


def main(argv: list | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mfc", description="Exact calculus of hbar-differential operators over maps.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a session file ('-' for stdin)")
    p_run.add_argument("file")
    p_eval = sub.add_parser("eval", help="evaluate one command against a session file")
    p_eval.add_argument("-e", "--expr", required=True)
    p_eval.add_argument("-s", "--session", default=None)
    sub.add_parser("selftest", help="run the acceptance checks")
    sub.add_parser("verbs", help="list the available commands")
    a = ap.parse_args(argv)

    if a.cmd == "run":
        def go():
            _, status, _ = execute(_read(a.file), out=sys.stdout)
            return status
        return _guard(go)
    if a.cmd == "eval":
        def go():
            s = Session()
            if a.session:
                s, _, _ = execute(_read(a.session), s, echo=False)
            _, status, lines = execute(a.expr, s, echo=False)
            if lines:
                print("\n".join(lines))
            return status
        return _guard(go)
    if a.cmd == "verbs":
        for v in VERBS.values():
            print(f"{v.name} {' '.join(v.args)}  -- {v.help}")
        return 0
    from mfc.acceptance import run_all

    return EXIT_OK if run_all(sys.stdout) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
