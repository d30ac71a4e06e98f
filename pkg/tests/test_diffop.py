from __future__ import annotations

import random

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from mfc.diffop import (
    NonlinearOperatorOverMap,
    OperatorOverMap,
    apply,
    commutator_with,
    compose,
    derivative_is_homomorphism,
    generator_relation_check,
    jet_var,
    leibniz_test_pairs,
    multi_indices,
    nonlinear_apply,
    nonlinear_derivative,
    order_oracle,
    random_operator,
    satisfies_leibniz,
    vector_field_over_map,
)
from mfc.errors import SpaceMismatch
from mfc.geometry import PolyMap, Space, random_map
from mfc.ring import HBAR, SeriesElement, random_series

from oracle import to_sympy

M1 = Space("M1", ("x1",))
M2 = Space("M2", ("y1",))
A = Space("A", ("a1", "a2"))
B = Space("B", ("b1", "b2"))
C = Space("C", ("c1",))
x1, y1 = M1.coordinate(0), M2.coordinate(0)


def sympy_apply(L: OperatorOverMap, g: SeriesElement):
    ys = [sympy.Symbol(n) for n in L.target.coords]
    ge = to_sympy(g)
    out = 0
    for alpha, c in L.coeffs.items():
        d = ge
        for y, a in zip(ys, alpha):
            if a:
                d = sympy.diff(d, y, a)
        out += to_sympy(c) * d
    return sympy.expand(out.subs({y: to_sympy(f) for y, f in zip(ys, L.carrier.components)}, simultaneous=True))


def test_apply_example():
    phi = PolyMap(M1, M2, (x1 ** 2,))
    L = OperatorOverMap(phi, {(1,): 1})
    assert str(apply(L, y1 ** 3)) == "3*x1^4"


def test_composition_example():
    phi = PolyMap(M1, M2, (x1 + 1,))
    psi = PolyMap(M2, C, (y1 ** 2,))
    L = OperatorOverMap(phi, {(0,): 1})
    K = OperatorOverMap(psi, {(2,): 1})
    LK = compose(L, K)
    assert str(LK) == "{ d[c1,c1]: 1 } over { c1 = x1^2 + 2*x1 + 1 }"
    assert LK.order == 2


@pytest.mark.parametrize("seed", range(15))
def test_apply_matches_sympy(seed):
    rng = random.Random(seed)
    phi = random_map(rng, A, B)
    L = random_operator(rng, phi, max_order=3, coeff_degree=2)
    g = random_series(rng, list(B.positions), 4, 4, True)
    assert to_sympy(apply(L, g)) == sympy_apply(L, g)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_compose_is_sequential_application(seed):
    rng = random.Random(seed)
    phi, psi = random_map(rng, A, B), random_map(rng, B, C)
    L = random_operator(rng, phi, max_order=2, coeff_degree=2)
    K = random_operator(rng, psi, max_order=2, coeff_degree=2)
    g = random_series(rng, list(C.positions), 4, 3)
    assert apply(compose(L, K), g) == apply(L, apply(K, g))


def test_compose_associative():
    rng = random.Random(2)
    for _ in range(5):
        f, g, h = random_map(rng, A, B), random_map(rng, B, C), random_map(rng, C, A)
        L, K, N = (random_operator(rng, m, max_order=2, coeff_degree=1) for m in (f, g, h))
        assert compose(compose(L, K), N) == compose(L, compose(K, N))


@pytest.mark.parametrize("seed", range(20))
def test_order_oracle_agrees_with_coefficients(seed):
    rng = random.Random(seed)
    L = random_operator(rng, random_map(rng, A, B), max_order=rng.randint(0, 3), coeff_degree=2)
    r = L.order
    assert order_oracle(L, r)
    assert order_oracle(L, r + 1)
    if r >= 0:
        assert not order_oracle(L, r - 1)


def test_order_zero_is_multiple_of_pullback():
    phi = PolyMap(M1, M2, (x1 ** 3,))
    L = OperatorOverMap(phi, {(0,): x1 + 2})
    assert order_oracle(L, 0)
    assert commutator_with(L, y1).is_zero()


def test_vector_field_relations():
    phi = PolyMap(M1, B, (x1, x1 ** 2))
    Y = vector_field_over_map([x1, 2 * x1], phi)
    assert satisfies_leibniz(Y, leibniz_test_pairs(B, 2))
    g = B.coordinate(0) * B.coordinate(1) + B.coordinate(1) ** 2
    r = generator_relation_check(Y, g)
    assert r.heisenberg and r.pullback and r.leibniz
    # a second-order operator is not a derivation
    Z = OperatorOverMap(phi, {(2, 0): 1})
    assert not satisfies_leibniz(Z, leibniz_test_pairs(B, 2))
    with pytest.raises(SpaceMismatch):
        vector_field_over_map([x1], phi)


def test_operators_reject_hbar():
    with pytest.raises(ValueError):
        OperatorOverMap(PolyMap(M1, M2, (x1,)), {(1,): SeriesElement.var(HBAR)})


def test_nonlinear_operator():
    phi = PolyMap(M1, M2, (x1 ** 2,))
    g1 = SeriesElement.var(jet_var(M2, (1,)))
    g0 = SeriesElement.var(jet_var(M2, (0,)))
    P = NonlinearOperatorOverMap(phi, g1 * g1 + x1 * g0)
    assert P.order == 1
    assert str(nonlinear_apply(P, y1 ** 3)) == "9*x1^8 + x1^7"
    assert str(nonlinear_derivative(P, y1 ** 3, y1)) == "6*x1^4 + x1^3"


def test_nonlinear_derivative_finite_difference():
    # d/de P(g + e h) at e = 0, via sympy in the parameter e
    rng = random.Random(9)
    phi = random_map(rng, M1, B)
    idx = multi_indices(2, 2)
    jets = [SeriesElement.var(jet_var(B, a)) for a in idx]
    poly = jets[1] * jets[2] + jets[3] ** 2 + x1 * jets[0] ** 3
    P = NonlinearOperatorOverMap(phi, poly)
    g = random_series(rng, list(B.positions), 3, 3)
    hh = random_series(rng, list(B.positions), 3, 3)
    e = sympy.Symbol("e")
    bs = [sympy.Symbol(n) for n in B.coords]
    G = to_sympy(g) + e * to_sympy(hh)
    vals = {}
    for a in idx:
        d = G
        for b, k in zip(bs, a):
            if k:
                d = sympy.diff(d, b, k)
        vals[a] = d
    expr = vals[idx[1]] * vals[idx[2]] + vals[idx[3]] ** 2 + sympy.Symbol("x1") * vals[idx[0]] ** 3
    expr = expr.subs({b: to_sympy(c) for b, c in zip(bs, phi.components)}, simultaneous=True)
    ref = sympy.expand(sympy.diff(expr, e).subs(e, 0))
    assert to_sympy(nonlinear_derivative(P, g, hh)) == ref


def test_derivative_homomorphism():
    phi = PolyMap(M1, M2, (x1 ** 2,))
    g0 = SeriesElement.var(jet_var(M2, (0,)))
    g = y1 + 1
    pairs = [(y1, y1 ** 2), (y1 + 2, y1 ** 3)]
    # linear zero-order: the derivative is phi^*, multiplicative
    assert all(derivative_is_homomorphism(NonlinearOperatorOverMap(phi, g0), g, a, b) for a, b in pairs)
    # square of the value: dP_g(h) = 2 g h, not multiplicative
    assert not derivative_is_homomorphism(NonlinearOperatorOverMap(phi, g0 * g0), g, *pairs[0])
