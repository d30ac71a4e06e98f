from __future__ import annotations

import random

import pytest
import sympy

from mfc.acceptance import random_change
from mfc.errors import MathDomainError, NonFormalPhase, NotInSymbolClass
from mfc.geometry import CoordinateChange, PolyMap, Space, random_map
from mfc.hbar import (
    HbarOperator,
    NotHomogeneous,
    PlaneWave,
    degree,
    degrees,
    full_symbol,
    full_symbol_basis,
    full_symbol_planewave,
    graded_components,
    hbar_apply,
    hbar_commutator,
    hbar_compose,
    hbar_order_oracle,
    in_symbol_class,
    over_classical_carrier,
    principal_symbol,
    random_hbar_operator,
    transform_coordinates,
)
from mfc.ring import HBAR, I, SeriesElement, random_series

from oracle import to_sympy

M = Space("M", ("x",))
A = Space("A", ("a1", "a2"))
B = Space("B", ("b1", "b2"))
x = M.coordinate(0)
h = SeriesElement.var(HBAR)
pM = SeriesElement.var(M.momentum(0))
ID = PolyMap.identity(M)
PHAT = HbarOperator.p_hat(M)
X = HbarOperator.multiplication(M, x)


def test_canonical_commutator():
    assert str(hbar_compose(PHAT, X) - hbar_compose(X, PHAT)) == "{ d[]: -i*hbar } over { x = x }"
    assert hbar_commutator(PHAT, x) == HbarOperator.multiplication(M, -I * h)


def test_pbasis_round_trip():
    rng = random.Random(1)
    for _ in range(20):
        L = random_hbar_operator(rng, random_map(rng, A, B), max_order=3)
        assert L.pbasis().to_operator() == L
        view = L.pbasis()
        for alpha, c in view.table.items():
            v = c.valuation(HBAR)
            assert v is None or v >= -sum(alpha)


@pytest.mark.parametrize(
    "table, deg",
    [
        ({(2,): h}, 3),  # hbar p^2
        ({(1,): 1}, 1),
        ({(0,): x ** 2}, 0),
        ({(3,): h * h}, 5),
    ],
)
def test_degree_examples(table, deg):
    assert degree(HbarOperator.from_pbasis(ID, table)) == deg


def test_inhomogeneous_degree():
    L = HbarOperator.from_pbasis(ID, {(1,): 1, (0,): 1})
    assert degrees(L) == [0, 1]
    with pytest.raises(NotHomogeneous):
        degree(L)
    pieces = graded_components(L)
    assert pieces[0] + pieces[1] == L


def test_perturbed_carrier_degrees():
    phi = PolyMap(M, M, (x + h * x * x,))
    L = HbarOperator.pullback(phi, nh=3)
    assert degrees(L) == [0, 1, 2, 3]
    base = over_classical_carrier(L)
    assert base.carrier == ID
    # g(x + hbar x^2) expanded to hbar^3, checked on g = x^5
    g = x ** 5
    assert hbar_apply(base, g) == hbar_apply(L, g).truncate(base.dcoeffs[(0,)].policy)
    with pytest.raises(MathDomainError):
        over_classical_carrier(HbarOperator.pullback(phi))


def sympy_hbar_apply(L: HbarOperator, g: SeriesElement):
    ys = [sympy.Symbol(n) for n in L.target.coords]
    out = 0
    for alpha, c in L.dcoeffs.items():
        d = to_sympy(g)
        for y, a in zip(ys, alpha):
            if a:
                d = sympy.diff(d, y, a)
        out += to_sympy(c) * d
    return sympy.expand(out.subs({y: to_sympy(f) for y, f in zip(ys, L.carrier.components)}, simultaneous=True))


@pytest.mark.parametrize("seed", range(10))
def test_apply_matches_sympy(seed):
    rng = random.Random(seed)
    L = random_hbar_operator(rng, random_map(rng, A, B, hbar=True), max_order=3)
    g = random_series(rng, list(B.positions), 4, 4, True)
    assert to_sympy(hbar_apply(L, g)) == sympy_hbar_apply(L, g)


@pytest.mark.parametrize("seed", range(10))
def test_compose_is_sequential(seed):
    rng = random.Random(100 + seed)
    L = random_hbar_operator(rng, random_map(rng, A, B, hbar=True), max_order=2)
    K = random_hbar_operator(rng, random_map(rng, B, A), max_order=2)
    g = random_series(rng, list(A.positions), 3, 3, True)
    assert hbar_apply(hbar_compose(L, K), g) == hbar_apply(L, hbar_apply(K, g))


def test_full_symbol_examples():
    assert full_symbol(PHAT) == pM
    assert full_symbol(HbarOperator.from_pbasis(ID, {(2,): h})) == pM * pM * h
    # plain d/dx is (i/hbar) p-hat: outside the symbol class
    D = HbarOperator(ID, {(1,): 1})
    assert full_symbol(D) == I * pM / h
    assert not in_symbol_class(D)
    with pytest.raises(NotInSymbolClass):
        principal_symbol(D)


def sympy_plane_wave_symbol(L: HbarOperator):
    """exp(-(i/hbar) phi p) L(exp((i/hbar) y p)), simplified with real exponentials."""
    hb = sympy.Symbol("hbar")
    ys = [sympy.Symbol(n) for n in L.target.coords]
    ps = [sympy.Symbol(v.name) for v in L.target.momenta]
    wave = sympy.exp(sympy.I / hb * sum(y * p for y, p in zip(ys, ps)))
    out = 0
    for alpha, c in L.dcoeffs.items():
        d = wave
        for y, a in zip(ys, alpha):
            if a:
                d = sympy.diff(d, y, a)
        out += to_sympy(c) * d
    comps = [to_sympy(f) for f in L.carrier.components]
    out = out.subs(dict(zip(ys, comps)), simultaneous=True)
    return sympy.expand(sympy.simplify(out * sympy.exp(-sympy.I / hb * sum(f * p for f, p in zip(comps, ps)))))


@pytest.mark.parametrize("seed", range(6))
def test_plane_wave_matches_sympy(seed):
    rng = random.Random(seed)
    L = random_hbar_operator(rng, random_map(rng, A, B, hbar=seed % 2 == 1), max_order=2, coeff_degree=1)
    assert to_sympy(full_symbol_planewave(L)) == sympy_plane_wave_symbol(L)


@pytest.mark.parametrize("seed", range(20))
def test_two_symbol_routes(seed):
    rng = random.Random(seed)
    L = random_hbar_operator(rng, random_map(rng, A, B, hbar=True), max_order=3, max_hbar=2)
    assert full_symbol_basis(L) == full_symbol_planewave(L)
    assert principal_symbol(L).series == full_symbol(L).at_hbar_zero()


def test_plane_wave_rule():
    w = PlaneWave.unit(M)
    d = w.differentiate(0)
    assert d.amplitude == I * pM / h
    assert d.differentiate(0).amplitude == -(pM * pM) / (h * h)


@pytest.mark.parametrize("seed", range(10))
def test_degree_invariance(seed):
    rng = random.Random(seed)
    N1 = Space("N1", ("u1", "u2"))
    N2 = Space("N2", ("w1", "w2"))
    L = random_hbar_operator(rng, random_map(rng, A, B), max_order=2, max_hbar=2)
    tch, sch = random_change(rng, B, N2), random_change(rng, A, N1)
    for k, piece in graded_components(L).items():
        assert degrees(transform_coordinates(piece, target=tch, source=sch)) == [k]


def test_transform_target_is_composition_with_pullback():
    N = Space("N", ("w",))
    c = CoordinateChange(PolyMap(M, N, (x + x ** 3,)))
    L = HbarOperator.from_pbasis(ID, {(1,): x})
    T = transform_coordinates(L, target=c)
    g = N.coordinate(0) ** 3
    assert hbar_apply(T, g) == hbar_apply(L, c.map.pullback(g))


@pytest.mark.parametrize("seed", range(15))
def test_hbar_order_oracle(seed):
    rng = random.Random(seed)
    L = random_hbar_operator(rng, random_map(rng, A, B, hbar=True), max_order=rng.randint(0, 3))
    r = L.order
    assert hbar_order_oracle(L, r)
    if r >= 0:
        assert not hbar_order_oracle(L, r - 1)


def test_hbar_order_rejects_plain_derivatives():
    D = HbarOperator(ID, {(1,): 1})
    assert not any(hbar_order_oracle(D, k) for k in range(3))


def test_divide_by_hbar():
    L = HbarOperator(ID, {(0,): h * x, (1,): h})
    assert L.divide_by_hbar() == HbarOperator(ID, {(0,): x, (1,): 1})
    with pytest.raises(MathDomainError):
        PHAT.divide_by_hbar().divide_by_hbar()


def test_phase_operators():
    L = HbarOperator(ID, {(0,): 1}, phase=x * x)
    assert str(L).startswith("exp(i/hbar*(x^2)) * ")
    # the phase can sit on the outer factor only
    assert hbar_compose(L, PHAT).phase == x * x
    with pytest.raises(NonFormalPhase):
        hbar_compose(PHAT, L)
    with pytest.raises(NonFormalPhase):
        L + PHAT


def test_negative_hbar_rejected_in_derivative_basis():
    with pytest.raises(MathDomainError):
        HbarOperator(ID, {(1,): h ** -1})
