"""Linear and non-linear differential operators over maps.

An operator over ``phi: M1 -> M2`` acts by

    L(g)(x) = sum_alpha L_alpha(x) * (d_y^alpha g)(phi(x)).

Composition goes through :class:`JetSymbolExpr`: the inner operator applied to
a generic ``g`` is a linear combination of jet placeholders ``g_gamma``
standing for ``(d^gamma g)(psi(x2))``, and the outer operator differentiates
that expression by the chain rule.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple

from mfc.errors import SpaceMismatch
from mfc.geometry import PolyMap, Space, compose_maps
from mfc.ring import (
    HBAR,
    JET,
    SeriesElement,
    Substitution,
    Var,
    as_series,
    random_series,
)

MultiIndex = tuple


def unit(dim: int, k: int) -> MultiIndex:
    return tuple(1 if j == k else 0 for j in range(dim))


def madd(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def multi_indices(dim: int, max_order: int) -> list:
    """All multi-indices of length ``dim`` with ``|alpha| <= max_order``, graded."""
    out = [()]
    for _ in range(dim):
        out = [a + (k,) for a in out for k in range(max_order + 1)]
    out = [a for a in out if sum(a) <= max_order]
    return sorted(out, key=lambda a: (sum(a), tuple(-x for x in a)))


def mi_sort_key(alpha: MultiIndex):
    return (-sum(alpha), tuple(-x for x in alpha))


def mi_factorial(alpha: MultiIndex) -> int:
    from math import factorial

    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def partial(g: SeriesElement, space: Space, alpha: MultiIndex) -> SeriesElement:
    for k, a in enumerate(alpha):
        for _ in range(a):
            g = g.differentiate(space.position(k))
    return g


def _clean_table(table: Mapping, dim: int) -> dict:
    out = {}
    for alpha, c in table.items():
        alpha = tuple(alpha)
        if len(alpha) != dim or any(a < 0 for a in alpha):
            raise ValueError(f"multi-index {alpha} does not fit a target of dimension {dim}")
        c = as_series(c)
        if alpha in out:
            c = out[alpha] + c
        out[alpha] = c
    return {a: c for a, c in out.items() if not c.is_zero()}


class JetSymbolExpr:
    """``sum_gamma c_gamma(x) * g_gamma`` attached to a carrier ``psi``.

    ``g_gamma`` stands for ``(d^gamma g)(psi(x))``.  Differentiating in a
    source coordinate uses ``d_a g_gamma = (d_a psi^k) g_{gamma + e_k}``.
    """

    __slots__ = ("carrier", "terms", "_dpsi")

    def __init__(self, carrier: PolyMap, terms: Mapping, _dpsi=None):
        self.carrier = carrier
        self.terms = dict(terms)
        if _dpsi is None:
            _dpsi = [[c.differentiate(x) for c in carrier.components] for x in carrier.source.positions]
        self._dpsi = _dpsi

    def differentiate(self, a: int) -> JetSymbolExpr:
        xa = self.carrier.source.positions[a]
        m = self.carrier.target.dim
        out: dict = {}

        def add(g, c):
            if c.is_zero():
                return
            if g in out:
                c = out[g] + c
            out[g] = c

        for gamma, c in self.terms.items():
            add(gamma, c.differentiate(xa))
            for k in range(m):
                d = self._dpsi[a][k]
                if not d.is_zero():
                    add(madd(gamma, unit(m, k)), c * d)
        return JetSymbolExpr(self.carrier, {g: c for g, c in out.items() if not c.is_zero()}, self._dpsi)

    def evaluate(self, g: SeriesElement) -> SeriesElement:
        sub = self.carrier.substitution()
        tgt = self.carrier.target
        total = SeriesElement.zero(self.carrier.source.positions)
        for gamma, c in self.terms.items():
            total = total + c * sub(partial(g, tgt, gamma))
        return total


def compose_tables(outer_carrier: PolyMap, outer: Mapping, inner_carrier: PolyMap, inner: Mapping) -> dict:
    """Coefficient table of ``outer o inner`` over ``inner_carrier o outer_carrier``."""
    if outer_carrier.target != inner_carrier.source:
        raise SpaceMismatch(
            f"space mismatch: operator into {outer_carrier.target.name} cannot compose with one from "
            f"{inner_carrier.source.name}"
        )
    positions = inner_carrier.source.positions
    inner = {b: c.with_variables(positions) for b, c in inner.items()}
    base = JetSymbolExpr(inner_carrier, inner)
    cache = {tuple(0 for _ in positions): base}

    def deriv(alpha):
        d = cache.get(alpha)
        if d is None:
            a = next(i for i, x in enumerate(alpha) if x)
            lower = alpha[:a] + (alpha[a] - 1,) + alpha[a + 1 :]
            d = deriv(lower).differentiate(a)
            cache[alpha] = d
        return d

    sub = outer_carrier.substitution()
    out: dict = {}
    for alpha in sorted(outer, key=lambda a: sum(a)):
        la = outer[alpha]
        for gamma, c in deriv(alpha).terms.items():
            t = la * sub(c)
            if gamma in out:
                t = out[gamma] + t
            out[gamma] = t
    return {g: c for g, c in out.items() if not c.is_zero()}


def render_table(table: Mapping, target: Space, head: str = "d") -> str:
    parts = []
    for alpha in sorted(table, key=mi_sort_key):
        names = ",".join(target.coords[k] for k, a in enumerate(alpha) for _ in range(a))
        parts.append(f"{head}[{names}]: {table[alpha]}")
    return "{ " + "; ".join(parts) + " }" if parts else "{ }"


class OperatorOverMap:
    """A differential operator over a classical map ``carrier: M1 -> M2``."""

    __slots__ = ("carrier", "coeffs")

    def __init__(self, carrier: PolyMap, coeffs: Mapping):
        if not carrier.is_classical:
            raise ValueError("operators over maps have hbar-free carriers; use HbarOperator")
        table = _clean_table(coeffs, carrier.target.dim)
        for alpha, c in table.items():
            c = carrier.source.function(c)
            if HBAR in c.free_variables():
                raise ValueError("operators over maps have hbar-free coefficients; use HbarOperator")
            table[alpha] = c
        self.carrier = carrier
        self.coeffs = table

    @classmethod
    def pullback(cls, carrier: PolyMap) -> OperatorOverMap:
        zero = tuple(0 for _ in range(carrier.target.dim))
        return cls(carrier, {zero: 1})

    @classmethod
    def multiplication(cls, space: Space, f) -> OperatorOverMap:
        return cls(PolyMap.identity(space), {tuple(0 for _ in range(space.dim)): f})

    @property
    def source(self) -> Space:
        return self.carrier.source

    @property
    def target(self) -> Space:
        return self.carrier.target

    @property
    def order(self) -> int:
        """Coefficient order: largest |alpha| with a nonzero coefficient (-1 for zero)."""
        return max((sum(a) for a in self.coeffs), default=-1)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, g: SeriesElement) -> SeriesElement:
        return apply(self, g)

    def _same_carrier(self, other):
        if self.carrier != other.carrier:
            raise SpaceMismatch("operators over different maps cannot be added")

    def __add__(self, other: OperatorOverMap) -> OperatorOverMap:
        self._same_carrier(other)
        t = dict(self.coeffs)
        for a, c in other.coeffs.items():
            t[a] = t[a] + c if a in t else c
        return OperatorOverMap(self.carrier, t)

    def __sub__(self, other: OperatorOverMap) -> OperatorOverMap:
        return self + other.scale(-1)

    def scale(self, c) -> OperatorOverMap:
        return OperatorOverMap(self.carrier, {a: x * c for a, x in self.coeffs.items()})

    def premultiply(self, f: SeriesElement) -> OperatorOverMap:
        return OperatorOverMap(self.carrier, {a: f * c for a, c in self.coeffs.items()})

    def __matmul__(self, other: OperatorOverMap) -> OperatorOverMap:
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, OperatorOverMap):
            return NotImplemented
        return self.carrier == other.carrier and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.carrier, frozenset(self.coeffs.items())))

    def __str__(self):
        return f"{render_table(self.coeffs, self.target)} over {self.carrier}"

    __repr__ = __str__


def apply(L: OperatorOverMap, g: SeriesElement) -> SeriesElement:
    g = L.target.function(g)
    sub = L.carrier.substitution()
    total = SeriesElement.zero(L.source.positions)
    for alpha, c in L.coeffs.items():
        total = total + c * sub(partial(g, L.target, alpha))
    return total


def compose(L: OperatorOverMap, K: OperatorOverMap) -> OperatorOverMap:
    """``L o K`` for ``L`` over ``M1 -> M2`` and ``K`` over ``M2 -> M3``."""
    table = compose_tables(L.carrier, L.coeffs, K.carrier, K.coeffs)
    return OperatorOverMap(compose_maps(L.carrier, K.carrier), table)


def commutator_with(L: OperatorOverMap, a: SeriesElement) -> OperatorOverMap:
    """``L o a - phi^*(a) o L`` for a target function ``a``."""
    left = compose(L, OperatorOverMap.multiplication(L.target, a))
    right = compose(OperatorOverMap.multiplication(L.source, L.carrier.pullback(a)), L)
    return left - right


def order_oracle(L: OperatorOverMap, k: int) -> bool:
    """Algebraic order test: True iff ``L`` has order <= k.

    Order 0 means ``L o a = phi^*(a) o L`` for every target coordinate ``a``;
    order k means each such commutator has order <= k - 1.
    """
    if k < 0:
        return L.is_zero()
    comms = [commutator_with(L, L.target.coordinate(j)) for j in range(L.target.dim)]
    if k == 0:
        return all(c.is_zero() for c in comms)
    return all(order_oracle(c, k - 1) for c in comms)


def vector_field_over_map(components: Iterable, carrier: PolyMap) -> OperatorOverMap:
    """``Y = Y^i(x) d/dy^i |_{y = phi(x)}``."""
    comps = list(components)
    m = carrier.target.dim
    if len(comps) != m:
        raise SpaceMismatch(f"dimension mismatch: a vector field over a map into {carrier.target.name} has {m} components")
    return OperatorOverMap(carrier, {unit(m, i): c for i, c in enumerate(comps)})


def satisfies_leibniz(L: OperatorOverMap, pairs: Iterable) -> bool:
    """Check ``L(g1 g2) = L(g1) phi^*(g2) + phi^*(g1) L(g2)`` on the given pairs."""
    for g1, g2 in pairs:
        lhs = L(g1 * g2)
        rhs = L(g1) * L.carrier.pullback(g2) + L.carrier.pullback(g1) * L(g2)
        if lhs != rhs:
            return False
    return True


def leibniz_test_pairs(space: Space, degree: int = 2) -> list:
    """Pairs of monomials up to ``degree`` on ``space`` (including the constant 1)."""
    from itertools import combinations_with_replacement

    monos = []
    for alpha in multi_indices(space.dim, degree):
        m = SeriesElement.constant(1, space.positions)
        for k, a in enumerate(alpha):
            m = m * space.coordinate(k) ** a
        monos.append(m)
    return list(combinations_with_replacement(monos, 2))


class RelationCheck(NamedTuple):
    heisenberg: bool
    pullback: bool
    leibniz: bool

    def __bool__(self):
        return self.heisenberg and self.pullback and self.leibniz


def generator_relation_check(Y: OperatorOverMap, g: SeriesElement, f: PolyMap | None = None) -> RelationCheck:
    """Check ``Y o g = phi^*(g) o Y + Y(g)``, ``phi^* o g = phi^*(g) phi^*`` and Leibniz for ``Y``.

    ``f`` is the carrier (defaults to the carrier of ``Y``).
    """
    phi = Y.carrier if f is None else f
    if phi != Y.carrier:
        raise SpaceMismatch("the vector field is not over the given map")
    g = phi.target.function(g)
    mult_g = OperatorOverMap.multiplication(phi.target, g)
    pulled = phi.pullback(g)
    zero = tuple(0 for _ in range(phi.target.dim))
    lhs = compose(Y, mult_g)
    rhs = compose(OperatorOverMap.multiplication(phi.source, pulled), Y) + OperatorOverMap(phi, {zero: Y(g)})
    pb = OperatorOverMap.pullback(phi)
    rel2 = compose(pb, mult_g) == OperatorOverMap(phi, {zero: pulled})
    leib = Y(SeriesElement.constant(1, phi.target.positions)).is_zero() and order_oracle(Y, 1)
    return RelationCheck(lhs == rhs, rel2, leib)


# -- non-linear operators ----------------------------------------------------


def jet_var(space: Space, gamma: MultiIndex) -> Var:
    names = ",".join(space.coords[k] for k, a in enumerate(gamma) for _ in range(a))
    return Var(JET, space.name, tuple(gamma), f"g[{names}]")


class NonlinearOperatorOverMap:
    """``L(g)(x) = P(x, dg, d^2 g, ...)|_{y = phi(x)}``.

    ``poly`` is a series in the source positions and the jet placeholders
    ``g[...]`` of the target (see :func:`jet_var`).
    """

    __slots__ = ("carrier", "poly")

    def __init__(self, carrier: PolyMap, poly: SeriesElement):
        allowed = set(carrier.source.positions) | {HBAR}
        for v in poly.free_variables():
            if v.kind == JET:
                if v.space != carrier.target.name or len(v.index) != carrier.target.dim:
                    raise SpaceMismatch(f"jet symbol {v.name} does not belong to {carrier.target.name}")
            elif v not in allowed:
                raise SpaceMismatch(f"{v.name} is not a coordinate of {carrier.source.name}")
        self.carrier = carrier
        self.poly = poly

    @classmethod
    def from_linear(cls, L: OperatorOverMap) -> NonlinearOperatorOverMap:
        p = SeriesElement.zero(L.source.positions)
        for alpha, c in L.coeffs.items():
            p = p + c * SeriesElement.var(jet_var(L.target, alpha))
        return cls(L.carrier, p)

    def jet_variables(self) -> list:
        return [v for v in self.poly.free_variables() if v.kind == JET]

    @property
    def order(self) -> int:
        return max((sum(v.index) for v in self.jet_variables()), default=0)

    def _jet_values(self, g: SeriesElement, variables) -> dict:
        g = self.carrier.target.function(g)
        sub = self.carrier.substitution()
        return {v: sub(partial(g, self.carrier.target, v.index)) for v in variables}

    def __call__(self, g: SeriesElement) -> SeriesElement:
        return nonlinear_apply(self, g)

    def __str__(self):
        return f"{self.poly} over {self.carrier}"


def nonlinear_apply(P: NonlinearOperatorOverMap, g: SeriesElement) -> SeriesElement:
    jets = P.jet_variables()
    return Substitution(P._jet_values(g, jets))(P.poly)


def nonlinear_derivative(P: NonlinearOperatorOverMap, g: SeriesElement, h: SeriesElement) -> SeriesElement:
    """Gateaux derivative ``d/de|_0 P(g + e h)``."""
    jets = P.jet_variables()
    at_g = Substitution(P._jet_values(g, jets))
    h_vals = P._jet_values(h, jets)
    total = SeriesElement.zero(P.carrier.source.positions)
    for v in jets:
        total = total + at_g(P.poly.differentiate(v)) * h_vals[v]
    return total


def derivative_is_homomorphism(P: NonlinearOperatorOverMap, g: SeriesElement, h1: SeriesElement,
                               h2: SeriesElement) -> bool:
    """Does ``dP_g(h1 h2) = dP_g(h1) dP_g(h2)`` hold for this pair?"""
    return nonlinear_derivative(P, g, h1 * h2) == nonlinear_derivative(P, g, h1) * nonlinear_derivative(P, g, h2)


# -- random instances for property tests -------------------------------------


def random_operator(rng, carrier: PolyMap, max_order: int = 2, coeff_degree: int = 2,
                    density: float = 0.6) -> OperatorOverMap:
    xs = list(carrier.source.positions)
    table = {}
    for alpha in multi_indices(carrier.target.dim, max_order):
        if rng.random() < density:
            table[alpha] = random_series(rng, xs, coeff_degree, 2)
    return OperatorOverMap(carrier, table)
