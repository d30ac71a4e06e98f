from __future__ import annotations

import random

import pytest
import sympy

from mfc.acceptance import canonical_square, random_matched_square
from mfc.errors import SpaceMismatch, SquareNotCommuting, SymbolsDoNotMatch
from mfc.geometry import PolyMap, Space, random_map
from mfc.hbar import HbarOperator, principal_symbol, random_hbar_operator
from mfc.ring import HBAR, SeriesElement, random_series
from mfc.symbols import (
    CommSquare,
    SymbolFunction,
    check_symbprod,
    matching_conditions,
    p_valuation_of_delta,
    pullback_symbol,
    pushforward,
    square_bracket,
    square_delta,
    symbol_product,
)

from oracle import to_sympy

M = Space("M", ("x",))
N = Space("N", ("y",))
Q = Space("Q", ("z",))
A = Space("A", ("a1", "a2"))
B = Space("B", ("b1", "b2"))
C = Space("C", ("c1",))
x, y = M.coordinate(0), N.coordinate(0)
pN = SeriesElement.var(N.momentum(0))
pQ = SeriesElement.var(Q.momentum(0))


def test_pushforward_example():
    H = SymbolFunction(PolyMap(M, N, (x + 1,)), x * pN)
    psi = PolyMap(N, Q, (y ** 2,))
    out = pushforward(H, psi)
    # dz/dy = 2y at y = x + 1
    assert out.series == x * (2 * x + 2) * pQ
    assert out.base == PolyMap(M, Q, ((x + 1) ** 2,))


def test_pullback_example():
    F = SymbolFunction(PolyMap.identity(N), y * pN)
    out = pullback_symbol(F, PolyMap(M, N, (x ** 3,)))
    assert out.series == x ** 3 * pN
    with pytest.raises(SpaceMismatch):
        pullback_symbol(F, PolyMap(M, Q, (x,)))


def test_symbol_rejects_foreign_variables():
    with pytest.raises(SpaceMismatch):
        SymbolFunction(PolyMap(M, N, (x,)), y)
    with pytest.raises(ValueError):
        SymbolFunction(PolyMap(M, N, (x + SeriesElement.var(HBAR),)), x)


@pytest.mark.parametrize("seed", range(8))
def test_pushforward_matches_sympy(seed):
    rng = random.Random(seed)
    phi, psi = random_map(rng, C, A), random_map(rng, A, B)
    H = SymbolFunction(phi, random_series(rng, list(C.positions) + list(A.momenta), 3, 4, True))
    got = pushforward(H, psi)
    a_syms = [sympy.Symbol(n) for n in A.coords]
    comps = [to_sympy(f) for f in psi.components]
    at = {a: to_sympy(f) for a, f in zip(a_syms, phi.components)}
    p3 = [sympy.Symbol(v.name) for v in B.momenta]
    sub = {}
    for i, p2 in enumerate(A.momenta):
        sub[sympy.Symbol(p2.name)] = sum(sympy.diff(comps[k], a_syms[i]).subs(at, simultaneous=True) * p3[k]
                                         for k in range(B.dim))
    ref = sympy.expand(to_sympy(H.series).subs(sub, simultaneous=True))
    assert to_sympy(got.series) == ref


def test_product_is_associative():
    rng = random.Random(4)
    for _ in range(5):
        f, g, h = random_map(rng, C, A), random_map(rng, A, B), random_map(rng, B, C)
        s = [SymbolFunction(m, random_series(rng, list(m.source.positions) + list(m.target.momenta), 2, 3))
             for m in (f, g, h)]
        assert (s[0] * s[1]) * s[2] == s[0] * (s[1] * s[2])
    with pytest.raises(SpaceMismatch):
        symbol_product(s[0], s[0])


@pytest.mark.parametrize("seed", range(15))
def test_symbol_multiplicativity(seed):
    rng = random.Random(seed)
    L = random_hbar_operator(rng, random_map(rng, C, A, hbar=True), max_order=2)
    K = random_hbar_operator(rng, random_map(rng, A, B, hbar=True), max_order=2)
    r = check_symbprod(L, K)
    assert r, (r.lhs, r.rhs)


def test_canonical_bracket():
    sq = canonical_square()
    assert matching_conditions(sq) == (True, True)
    assert str(square_delta(sq).dcoeffs[(0,)]) == "-i*hbar"
    assert square_bracket(sq).series == SeriesElement.constant(1)
    assert square_bracket(sq.swapped()).series == SeriesElement.constant(-1)
    assert p_valuation_of_delta(sq) == 1


@pytest.mark.parametrize("seed", range(10))
def test_bracket_is_poisson_on_identity_square(seed):
    # L = a(x) p-hat, K = b(x) p-hat over the identity: bracket = {a p, b p}
    rng = random.Random(seed)
    a, b = (random_series(rng, [M.position(0)], 3, 3) for _ in range(2))
    i = PolyMap.identity(M)
    L = HbarOperator.from_pbasis(i, {(1,): a})
    K = HbarOperator.from_pbasis(i, {(1,): b})
    got = square_bracket(CommSquare(L, L, K, K)).series
    xs, ps = sympy.Symbol("x"), sympy.Symbol(M.momentum(0).name)
    f, g = to_sympy(a) * ps, to_sympy(b) * ps
    ref = sympy.expand(sympy.diff(f, ps) * sympy.diff(g, xs) - sympy.diff(f, xs) * sympy.diff(g, ps))
    assert to_sympy(got) == ref


@pytest.mark.parametrize("seed", range(9))
def test_matched_squares_have_hbar_divisible_delta(seed):
    rng = random.Random(seed)
    sq = random_matched_square(rng, seed % 3)
    assert matching_conditions(sq) == (True, True)
    delta = square_delta(sq)
    assert principal_symbol(delta).series.is_zero()
    v = delta.hbar_valuation()
    assert v is None or v >= 1
    bracket = square_bracket(sq)
    assert square_bracket(sq.swapped()).series == -bracket.series


def test_non_commuting_square():
    i = PolyMap.identity(M)
    shift = PolyMap(M, M, (x + 1,))
    P = HbarOperator.p_hat(M)
    with pytest.raises(SquareNotCommuting):
        CommSquare(HbarOperator.pullback(shift), P, P, P)
    # commuting square with mismatched symbols
    X2 = HbarOperator.multiplication(M, x * x)
    with pytest.raises(SymbolsDoNotMatch):
        square_bracket(CommSquare(P, HbarOperator.pullback(i), X2, X2))
