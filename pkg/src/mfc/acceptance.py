"""Acceptance checks, runnable as ``mfc selftest``.

Each check draws its random instances from a seeded ``random.Random`` and
compares exact values; nothing here uses a tolerance.
"""

from __future__ import annotations

import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Callable

from mfc.diffop import order_oracle, random_operator
from mfc.geometry import (
    Connection,
    CoordinateChange,
    PolyMap,
    Space,
    compose_maps,
    exp_map,
    random_map,
)
from mfc.hbar import (
    HbarOperator,
    degrees,
    full_symbol_basis,
    full_symbol_planewave,
    graded_components,
    hbar_compose,
    hbar_order_oracle,
    principal_symbol,
    random_hbar_operator,
    transform_coordinates,
)
from mfc.micro import (
    GeneratingFunction,
    MicromorphismData,
    micromorphism_from_operator,
    quantize_micromorphism,
    thick_pullback,
)
from mfc.ring import HBAR, I, POSITION, SeriesElement, Substitution, Var, random_series
from mfc.symbols import CommSquare, check_symbprod, matching_conditions, square_bracket, square_delta

SEED = 20240531


@dataclass
class Outcome:
    ok: bool
    detail: str


def _space(rng, name: str, letter: str, max_dim: int = 2) -> Space:
    d = rng.randint(1, max_dim)
    return Space(name, tuple(f"{letter}{k + 1}" for k in range(d)))


def _hbar_op(rng, carrier, **kw) -> HbarOperator:
    return random_hbar_operator(rng, carrier, **kw)


# 1 -------------------------------------------------------------------------------


def symbol_multiplicativity(rng, n: int = 100) -> Outcome:
    bad = 0
    for _ in range(n):
        M1, M2, M3 = _space(rng, "M1", "x"), _space(rng, "M2", "y"), _space(rng, "M3", "z")
        phi = random_map(rng, M1, M2, max_degree=2, hbar=rng.random() < 0.2)
        psi = random_map(rng, M2, M3, max_degree=2, hbar=rng.random() < 0.2)
        L = _hbar_op(rng, phi, max_order=rng.randint(0, 3), coeff_degree=3, max_hbar=1, density=0.4)
        K = _hbar_op(rng, psi, max_order=rng.randint(0, 3), coeff_degree=3, max_hbar=1, density=0.4)
        if not check_symbprod(L, K):
            bad += 1
    return Outcome(bad == 0, f"{n - bad}/{n} pairs")


# 2 -------------------------------------------------------------------------------


def random_change(rng, space: Space, new: Space, degree: int = 3) -> CoordinateChange:
    """Invertible jet without constant term: unipotent linear part plus terms up to ``degree``."""
    xs = list(space.positions)
    comps = []
    for k in range(space.dim):
        c = space.coordinate(k)
        for j in range(k + 1, space.dim):
            c = c + space.coordinate(j).scale(rng.randint(-2, 2))
        c = c + random_series(rng, xs, degree, 2).filter(lambda m: sum(e for _, e in m) >= 2)
        comps.append(c)
    return CoordinateChange(PolyMap(space, new, tuple(comps)))


def degree_invariance(rng, n: int = 50) -> Outcome:
    bad = 0
    checked = 0
    for t in range(n):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        M1b = Space("N1", tuple(f"u{k + 1}" for k in range(M1.dim)))
        M2b = Space("N2", tuple(f"w{k + 1}" for k in range(M2.dim)))
        perturbed = t % 5 == 4
        phi = random_map(rng, M1, M2, hbar=perturbed)
        L = _hbar_op(rng, phi, max_order=2, coeff_degree=2, max_hbar=2, nh=4 if perturbed else None)
        tch = random_change(rng, M2, M2b)
        sch = random_change(rng, M1, M1b)
        for k, piece in graded_components(L).items():
            for kw in ({"target": tch}, {"source": sch}, {"target": tch, "source": sch}):
                checked += 1
                if degrees(transform_coordinates(piece, **kw)) != [k]:
                    bad += 1
    return Outcome(bad == 0, f"{checked - bad}/{checked} homogeneous components")


# 3 -------------------------------------------------------------------------------


def canonical_square():
    M = Space("M", ("x",))
    P = HbarOperator.p_hat(M)
    X = HbarOperator.multiplication(M, M.coordinate(0))
    return CommSquare(P, P, X, X)


def bracket_canonical(rng=None) -> Outcome:
    sq = canonical_square()
    M = sq.phi21.source
    first, second = matching_conditions(sq)
    delta = square_delta(sq)
    expected = HbarOperator.multiplication(M, SeriesElement({((HBAR, 1),): -I}))
    b = square_bracket(sq)
    ok = first and second and delta == expected and b.series == SeriesElement.constant(1)
    return Outcome(ok, f"Delta = {delta.dcoeffs.get((0,))}, bracket = {b}")


# 4 -------------------------------------------------------------------------------


def _zero_order(carrier, f) -> HbarOperator:
    return HbarOperator(carrier, {tuple(0 for _ in range(carrier.target.dim)): f})


def _hbar_times(L: HbarOperator) -> HbarOperator:
    return L.scale(SeriesElement.var(HBAR))


def random_matched_square(rng, kind: int) -> CommSquare:
    """Commutative squares whose symbols satisfy the matching conditions by construction."""
    small = {"max_order": 2, "coeff_degree": 2, "max_hbar": 1, "density": 0.5}
    if kind == 0:
        M = _space(rng, "M", "x")
        i = PolyMap.identity(M)
        L12, K13 = _hbar_op(rng, i, **small), _hbar_op(rng, i, **small)
        L34 = L12 + _hbar_times(_hbar_op(rng, i, **small))
        K24 = K13 + _hbar_times(_hbar_op(rng, i, **small))
        return CommSquare(L12, L34, K13, K24)
    if kind == 1:
        # psi31 = id, K zero-order
        M1, M2, M4 = _space(rng, "M1", "x"), _space(rng, "M2", "y"), _space(rng, "M4", "w")
        phi21 = random_map(rng, M1, M2)
        psi42 = random_map(rng, M2, M4)
        phi43 = compose_maps(phi21, psi42)
        a = random_series(rng, list(M2.positions), 2, 3)
        L12 = _hbar_op(rng, phi21, **small)
        L34 = hbar_compose(L12, HbarOperator.pullback(psi42)) + _hbar_times(_hbar_op(rng, phi43, **small))
        K24 = _zero_order(psi42, a) + _hbar_times(_hbar_op(rng, psi42, **small))
        K13 = _zero_order(PolyMap.identity(M1), phi21.pullback(a)) + _hbar_times(
            _hbar_op(rng, PolyMap.identity(M1), **small))
        return CommSquare(L12, L34, K13, K24)
    # phi21 = id, L zero-order
    M1, M3, M4 = _space(rng, "M1", "x"), _space(rng, "M3", "z"), _space(rng, "M4", "w")
    psi31 = random_map(rng, M1, M3)
    phi43 = random_map(rng, M3, M4)
    psi42 = compose_maps(psi31, phi43)
    b = random_series(rng, list(M3.positions), 2, 3)
    idm = PolyMap.identity(M1)
    L12 = _zero_order(idm, psi31.pullback(b)) + _hbar_times(_hbar_op(rng, idm, **small))
    L34 = _zero_order(phi43, b) + _hbar_times(_hbar_op(rng, phi43, **small))
    K13 = _hbar_op(rng, psi31, **small)
    K24 = hbar_compose(K13, HbarOperator.pullback(phi43)) + _hbar_times(_hbar_op(rng, psi42, **small))
    return CommSquare(L12, L34, K13, K24)


def delta_divisibility(rng, n: int = 25) -> Outcome:
    bad = 0
    for t in range(n):
        sq = random_matched_square(rng, t % 3)
        first, second = matching_conditions(sq)
        delta = square_delta(sq)
        zero = principal_symbol(delta).series.is_zero()
        divisible = all((c.valuation(HBAR) or 0) >= 1 for c in delta.dcoeffs.values())
        if not (first and second and zero and divisible):
            bad += 1
    return Outcome(bad == 0, f"{n - bad}/{n} squares")


# 5 -------------------------------------------------------------------------------


def thick_expansion(rng=None) -> Outcome:
    M = Space("M", ("x",))
    p = SeriesElement.var(M.momentum(0))
    splus = p * p / 2
    L = thick_pullback(GeneratingFunction(SeriesElement.zero(), PolyMap.identity(M), splus), 2)
    h = SeriesElement.var(HBAR)
    x = M.coordinate(0)
    # L(g) = g - (i hbar / 2) g'' - (hbar^2 / 8) g''''
    g = x ** 6 + x ** 3 * 2 - x
    d = [g]
    for _ in range(4):
        d.append(d[-1].differentiate(M.position(0)))
    expected_g = d[0] - (I * h / 2) * d[2] - (h * h / 8) * d[4]
    first = L(g) == expected_g
    # exp((i/hbar) S+) summed directly, keeping hbar-power + p-degree <= 2
    w = splus * SeriesElement({((HBAR, -1),): I})
    total = SeriesElement.zero()
    term = SeriesElement.constant(1)
    for k in range(3):
        total = total + term
        term = (term * w).scale(Fraction(1, k + 1))
    total = total.truncate_weighted({HBAR.kind: 1, M.momentum(0).kind: 1}, 2)
    second = full_symbol_planewave(L) == total
    return Outcome(first and second, f"expansion {'ok' if first else 'wrong'}, plane-wave symbol {'ok' if second else 'wrong'}")


# 6 -------------------------------------------------------------------------------


def full_symbol_consistency(rng, n: int = 100) -> Outcome:
    bad = 0
    for _ in range(n):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        phi = random_map(rng, M1, M2, hbar=rng.random() < 0.3)
        L = _hbar_op(rng, phi, max_order=3, coeff_degree=2, max_hbar=2)
        a, b = full_symbol_basis(L), full_symbol_planewave(L)
        if a != b or principal_symbol(L).series != a.at_hbar_zero():
            bad += 1
    return Outcome(bad == 0, f"{n - bad}/{n} operators")


# 7 -------------------------------------------------------------------------------


def random_connection(rng, space: Space) -> Connection:
    table = {}
    for k in range(space.dim):
        for i in range(space.dim):
            for j in range(i, space.dim):
                if rng.random() < 0.5:
                    table[(k, i, j)] = random_series(rng, list(space.positions), 1, 2)
    return Connection(space, table)


def micromorphism_round_trip(rng, n: int = 50, m: int = 25) -> Outcome:
    bad = 0
    for t in range(n):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        phi = random_map(rng, M1, M2, hbar=t % 4 == 3)
        L = _hbar_op(rng, phi, max_order=3, coeff_degree=2, max_hbar=2, nh=rng.choice([None, 3, 4]))
        if quantize_micromorphism(micromorphism_from_operator(L), L.nh) != L:
            bad += 1
    bad_q = 0
    for t in range(m):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        phi = random_map(rng, M1, M2)
        ps = list(M2.momenta)
        sb = random_series(rng, list(M1.positions) + ps, 3, 3).filter(
            lambda mono: sum(e for v, e in mono if v in ps) >= 2)
        H = random_series(rng, list(M1.positions) + ps, 2, 3) + SeriesElement.var(HBAR) * random_series(
            rng, list(M1.positions) + ps, 2, 2)
        conn = random_connection(rng, M2) if t % 2 else None
        Q = quantize_micromorphism(MicromorphismData(phi, sb, H, conn), 3)
        if any((c.valuation(HBAR) or 0) < 0 for c in Q.dcoeffs.values()):
            bad_q += 1
    return Outcome(bad == 0 and bad_q == 0, f"round trip {n - bad}/{n}, class membership {m - bad_q}/{m}")


# 8 -------------------------------------------------------------------------------


def geodesic_residual(conn: Connection, order: int) -> SeriesElement:
    """``x'' + Gamma(x)(x', x')`` for ``x(t) = exp_x(t v)``, keeping t-degree <= order - 2."""
    sp = conn.space
    t = Var(POSITION, "time", 0, "t")
    tv = Substitution({v: SeriesElement.var(t) * SeriesElement.var(v) for v in sp.velocities})
    X = [tv(c) for c in exp_map(conn, order).components]
    X1 = [c.differentiate(t) for c in X]
    X2 = [c.differentiate(t) for c in X1]
    at_X = Substitution(dict(zip(sp.positions, X)))
    keep = lambda mono: dict(mono).get(t, 0) <= order - 2  # noqa: E731
    out = []
    for k in range(sp.dim):
        r = X2[k]
        for (kk, i, j), g in conn.christoffel.items():
            if kk == k:
                r = r + (at_X(g) * X1[i]).filter(keep) * X1[j]
        out.append(r.filter(keep))
    return out


def geodesic_exponential(rng, n: int = 10) -> Outcome:
    M = Space("M", ("x",))
    v = SeriesElement.var(M.velocity(0))
    closed_ok = True
    for c in (Fraction(1), Fraction(2), Fraction(-1, 3), Fraction(5, 2)):
        E = exp_map(Connection(M, {(0, 0, 0): SeriesElement.constant(c)}), 6)
        # x + ln(1 + c v) / c through v^4
        closed = M.coordinate(0)
        for k in range(1, 5):
            closed = closed + v ** k * (Fraction((-1) ** (k + 1), k) * c ** (k - 1))
        got = E.components[0].filter(lambda mono: dict(mono).get(M.velocity(0), 0) <= 4)
        closed_ok = closed_ok and got == closed
    resid_ok = True
    for _ in range(n):
        sp = _space(rng, "M", "x")
        conn = random_connection(rng, sp)
        resid_ok = resid_ok and all(r.is_zero() for r in geodesic_residual(conn, 5))
    return Outcome(closed_ok and resid_ok, f"closed form {'ok' if closed_ok else 'wrong'}, "
                                           f"ODE residual {'zero' if resid_ok else 'nonzero'} on {n} connections")


# 9 -------------------------------------------------------------------------------


def order_oracles(rng, n: int = 50) -> Outcome:
    bad = 0
    for _ in range(n):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        phi = random_map(rng, M1, M2)
        L = random_operator(rng, phi, max_order=rng.randint(0, 3), coeff_degree=2)
        r = L.order
        if not order_oracle(L, r) or (r >= 0 and order_oracle(L, r - 1)):
            bad += 1
    bad_h = 0
    for _ in range(n):
        M1, M2 = _space(rng, "M1", "x"), _space(rng, "M2", "y")
        phi = random_map(rng, M1, M2, hbar=rng.random() < 0.3)
        L = _hbar_op(rng, phi, max_order=rng.randint(0, 3), coeff_degree=2, max_hbar=1)
        r = L.order
        if not hbar_order_oracle(L, r) or (r >= 0 and hbar_order_oracle(L, r - 1)):
            bad_h += 1
    return Outcome(bad == 0 and bad_h == 0, f"classical {n - bad}/{n}, hbar {n - bad_h}/{n}")


# 10 ------------------------------------------------------------------------------


def walkthrough_text() -> tuple:
    data = resources.files("mfc") / "data"
    return (data / "walkthrough.mfc").read_text(encoding="utf-8"), (data / "walkthrough.out").read_text(encoding="utf-8")


def golden_session(rng=None) -> Outcome:
    import io

    from mfc.cli import execute

    src, expected = walkthrough_text()
    runs = []
    for _ in range(2):
        buf = io.StringIO()
        _, status, _ = execute(src, out=buf)
        runs.append((status, buf.getvalue()))
    ok = runs[0] == runs[1] and runs[0][0] == 0 and runs[0][1] == expected
    return Outcome(ok, "byte-identical" if ok else "output differs from the golden file")


CRITERIA: list = [
    (1, "symbol multiplicativity", symbol_multiplicativity),
    (2, "degree invariance under coordinate changes", degree_invariance),
    (3, "canonical bracket", bracket_canonical),
    (4, "Delta divisible by hbar on matched squares", delta_divisibility),
    (5, "thick pullback expansion and full symbol", thick_expansion),
    (6, "full symbol: basis readout vs plane wave", full_symbol_consistency),
    (7, "micromorphism round trip and class membership", micromorphism_round_trip),
    (8, "geodesic exponential", geodesic_exponential),
    (9, "order oracles", order_oracles),
    (10, "golden session", golden_session),
]


def run_criterion(number: int) -> Outcome:
    _, _, fn = CRITERIA[number - 1]
    return fn(random.Random(SEED + number))


def run_all(out=sys.stdout, only: Callable | None = None) -> bool:
    all_ok = True
    for number, title, fn in CRITERIA:
        if only is not None and not only(number):
            continue
        t0 = time.perf_counter()
        r = fn(random.Random(SEED + number))
        dt = time.perf_counter() - t0
        all_ok = all_ok and r.ok
        out.write(f"[{'PASS' if r.ok else 'FAIL'}] {number:2d} {title}: {r.detail} ({dt:.1f}s)\n")
    return all_ok
