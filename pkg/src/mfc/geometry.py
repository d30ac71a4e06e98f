"""Coordinate spaces, polynomial maps, coordinate changes and geodesic series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from mfc.errors import DivergentSubstitution, NonInvertibleJet, SpaceMismatch
from mfc.ring import (
    HBAR,
    MOMENTUM,
    POSITION,
    VELOCITY,
    SeriesElement,
    Substitution,
    TruncationPolicy,
    Var,
    as_series,
    jet_invert,
)


@dataclass(frozen=True)
class Space:
    """A coordinate space ``R^dim`` with named coordinates."""

    name: str
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if not self.coords:
            raise ValueError("a space needs at least one coordinate")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"coordinate names of {self.name} are not distinct")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def tag(self) -> str:
        # M2 -> "2", so momenta read p2_1
        if self.name[:1] == "M" and len(self.name) > 1:
            return self.name[1:]
        return self.name

    def position(self, i: int) -> Var:
        return Var(POSITION, self.name, i, self.coords[i])

    @property
    def positions(self) -> tuple:
        return tuple(self.position(i) for i in range(self.dim))

    def momentum(self, i: int) -> Var:
        return Var(MOMENTUM, self.name, i, f"p{self.tag}_{i + 1}")

    @property
    def momenta(self) -> tuple:
        return tuple(self.momentum(i) for i in range(self.dim))

    def velocity(self, i: int) -> Var:
        return Var(VELOCITY, self.name, i, f"v{self.tag}_{i + 1}")

    @property
    def velocities(self) -> tuple:
        return tuple(self.velocity(i) for i in range(self.dim))

    def coordinate(self, i: int) -> SeriesElement:
        return SeriesElement.var(self.position(i), self.positions)

    def index_of(self, coord: str) -> int:
        try:
            return self.coords.index(coord)
        except ValueError:
            raise KeyError(f"unknown coordinate {coord!r} of {self.name}") from None

    def function(self, f) -> SeriesElement:
        """Declare ``f`` as a function on this space (positions and hbar)."""
        f = as_series(f).with_variables(self.positions)
        allowed = set(self.positions) | {HBAR}
        extra = [v.name for v in f.free_variables() if v not in allowed]
        if extra:
            raise SpaceMismatch(f"{', '.join(extra)} are not coordinates of {self.name}")
        return f


@dataclass(frozen=True, eq=False)
class PolyMap:
    """A map ``source -> target`` given by one series per target coordinate.

    Components may contain ``hbar`` (an hbar-perturbed map); the classical
    carrier is obtained with :meth:`classical`.
    """

    source: Space
    target: Space
    components: tuple

    def __post_init__(self):
        comps = tuple(self.source.function(c) for c in self.components)
        if len(comps) != self.target.dim:
            raise SpaceMismatch(
                f"dimension mismatch: map to {self.target.name} needs {self.target.dim} components, got {len(comps)}"
            )
        object.__setattr__(self, "components", comps)

    @classmethod
    def identity(cls, space: Space) -> PolyMap:
        return cls(space, space, tuple(space.coordinate(i) for i in range(space.dim)))

    def __eq__(self, other):
        if not isinstance(other, PolyMap):
            return NotImplemented
        return self.source == other.source and self.target == other.target and self.components == other.components

    def __hash__(self):
        return hash((self.source, self.target, self.components))

    @property
    def is_classical(self) -> bool:
        return all(HBAR not in c.free_variables() for c in self.components)

    def classical(self) -> PolyMap:
        if self.is_classical:
            return self
        return PolyMap(self.source, self.target, tuple(c.at_hbar_zero() for c in self.components))

    def assignment(self) -> dict:
        return dict(zip(self.target.positions, self.components))

    def substitution(self) -> Substitution:
        return Substitution(self.assignment())

    def pullback(self, g: SeriesElement) -> SeriesElement:
        return pullback_function(self, g)

    def then(self, g: PolyMap) -> PolyMap:
        return compose_maps(self, g)

    def __str__(self):
        return "{ " + "; ".join(f"{c} = {f}" for c, f in zip(self.target.coords, self.components)) + " }"


def compose_maps(f: PolyMap, g: PolyMap) -> PolyMap:
    """``g o f`` for ``f: A -> B`` and ``g: B -> C``."""
    if f.target != g.source:
        raise SpaceMismatch(f"space mismatch: {f.target.name} -> ... cannot feed {g.source.name}")
    sub = f.substitution()
    return PolyMap(f.source, g.target, tuple(sub(c) for c in g.components))


def jacobian(f: PolyMap) -> list:
    """Matrix with entry ``(i, a) = d f^i / d x^a``."""
    return [[c.differentiate(x) for x in f.source.positions] for c in f.components]


def pullback_function(f: PolyMap, g: SeriesElement) -> SeriesElement:
    """``g o f`` for a function ``g`` on the target."""
    g = f.target.function(g)
    return f.substitution()(g)


@dataclass(frozen=True, eq=False)
class CoordinateChange:
    """An invertible change of coordinates ``space -> renamed copy``.

    The inverse is computed once, at construction.  Changes with a nonzero
    constant term are allowed only when the centred part has an exact
    polynomial inverse.
    """

    map: PolyMap
    order: int = 6
    inverse: PolyMap = field(init=False)

    def __post_init__(self):
        m = self.map
        if m.source.dim != m.target.dim:
            raise NonInvertibleJet("non-invertible jet: a coordinate change must preserve dimension")
        if not m.is_classical:
            raise ValueError("coordinate changes cannot depend on hbar")
        shifts = [c.constant_term() for c in m.components]
        centred = [c - s for c, s in zip(m.components, shifts)]
        inv = jet_invert(centred, list(m.source.positions), list(m.target.positions), self.order)
        if any(shifts):
            back = Substitution({y: SeriesElement.var(y) - s for y, s in zip(m.target.positions, shifts)})
            try:
                inv = [back(c) for c in inv]
            except DivergentSubstitution:
                raise NonInvertibleJet(
                    "non-invertible jet: a shifted change needs an exact polynomial inverse"
                ) from None
        object.__setattr__(self, "inverse", PolyMap(m.target, m.source, tuple(inv)))

    @property
    def source(self) -> Space:
        return self.map.source

    @property
    def target(self) -> Space:
        return self.map.target

    @property
    def exact(self) -> bool:
        return all(c.policy.unbounded for c in self.inverse.components)


@dataclass(frozen=True, eq=False)
class Connection:
    """Christoffel symbols ``christoffel[(k, i, j)] = Gamma^k_ij`` (0-based)."""

    space: Space
    christoffel: Mapping

    def __post_init__(self):
        n = self.space.dim
        table = {}
        for (k, i, j), g in dict(self.christoffel).items():
            if not (0 <= k < n and 0 <= i < n and 0 <= j < n):
                raise IndexError(f"Christoffel index {(k, i, j)} out of range for {self.space.name}")
            g = self.space.function(g)
            if HBAR in g.free_variables():
                raise ValueError("Christoffel symbols cannot depend on hbar")
            table[(k, i, j)] = g
        for (k, i, j), g in list(table.items()):
            other = table.get((k, j, i))
            if other is None:
                table[(k, j, i)] = g
            elif other != g:
                raise ValueError(f"Christoffel symbols must be symmetric: Gamma^{k}_{i}{j} != Gamma^{k}_{j}{i}")
        object.__setattr__(self, "christoffel", {key: g for key, g in table.items() if not g.is_zero()})

    @classmethod
    def flat(cls, space: Space) -> Connection:
        return cls(space, {})

    @property
    def is_flat(self) -> bool:
        return not self.christoffel

    def gamma(self, k: int, i: int, j: int) -> SeriesElement:
        return self.christoffel.get((k, i, j), SeriesElement.zero(self.space.positions))


@dataclass(frozen=True, eq=False)
class ExpMap:
    """Truncated series ``(x, v) -> exp_x(v)`` on ``space``."""

    space: Space
    components: tuple
    order: int

    def at(self, f: PolyMap) -> tuple:
        """Components of ``exp_{f(x)}(v)``: series in the source positions of ``f`` and ``v``."""
        if f.target != self.space:
            raise SpaceMismatch(f"space mismatch: exponential map lives on {self.space.name}")
        sub = f.substitution()
        return tuple(sub(c) for c in self.components)

    def displacement(self) -> tuple:
        """``exp_x(v) - x``."""
        return tuple(c - SeriesElement.var(x) for c, x in zip(self.components, self.space.positions))


def geodesic_spray(conn: Connection, f: SeriesElement) -> SeriesElement:
    """Total t-derivative along geodesics: ``v^i d/dx^i - Gamma^k_ij v^i v^j d/dv^k``."""
    sp = conn.space
    xs, vs = sp.positions, sp.velocities
    v = [SeriesElement.var(w) for w in vs]
    out = SeriesElement.zero(f.variables).with_variables(xs + vs)
    f = f.with_variables(xs + vs)
    for i in range(sp.dim):
        out = out + v[i] * f.differentiate(xs[i])
    if conn.christoffel:
        for k in range(sp.dim):
            dk = f.differentiate(vs[k])
            if dk.is_zero():
                continue
            acc = SeriesElement.zero()
            for (kk, i, j), g in conn.christoffel.items():
                if kk == k:
                    acc = acc + g * v[i] * v[j]
            out = out - acc * dk
    return out


def exp_map(conn: Connection, order: int) -> ExpMap:
    """Geodesic exponential map as a series in the velocity, to degree ``order``.

    The t^m coefficient of the geodesic x(t) with x(0)=x, x'(0)=v is D^m(x)/m!
    for the spray D; it is homogeneous of degree m in v, and x(1) sums them.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    sp = conn.space
    policy = TruncationPolicy(velocity=order)
    comps = []
    for k in range(sp.dim):
        term = SeriesElement.var(sp.position(k), sp.positions + sp.velocities)
        total = term
        for m in range(1, order + 1):
            term = geodesic_spray(conn, term)
            total = total + term.scale(Fraction(1, math.factorial(m)))
            if term.is_zero():
                break
        comps.append(total.with_policy(policy))
    return ExpMap(sp, tuple(comps), order)


def random_map(rng, source: Space, target: Space, max_degree: int = 2, n_terms: int = 3,
               hbar: bool = False) -> PolyMap:
    from mfc.ring import random_series

    comps = []
    for _ in range(target.dim):
        c = random_series(rng, list(source.positions), max_degree, n_terms)
        if hbar:
            c = c + SeriesElement.var(HBAR) * random_series(rng, list(source.positions), 1, 2)
        comps.append(c)
    return PolyMap(source, target, tuple(comps))
