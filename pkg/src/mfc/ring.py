"""Exact coefficient ring and truncated multivariate series.

Coefficients are Gaussian rationals ``a + b*i`` with ``a, b`` in Q.  A
:class:`SeriesElement` is a sparse map from monomials to coefficients over a
declared set of variables, together with a :class:`TruncationPolicy` bounding
the total degree per variable kind.  Only the ``hbar`` variable may carry a
negative exponent (Laurent series in hbar).

Monomials are tuples of ``(Var, exponent)`` pairs sorted by variable, with no
zero exponents.  Everything here is immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Union

from mfc.errors import (
    DivergentSubstitution,
    MathDomainError,
    NonInvertibleJet,
    UnknownVariable,
    VariableSpaceMismatch,
)

POSITION, VELOCITY, MOMENTUM, HBAR_KIND, JET = 0, 1, 2, 3, 4
KIND_NAMES = {POSITION: "position", VELOCITY: "velocity", MOMENTUM: "momentum", HBAR_KIND: "hbar", JET: "jet"}


class GaussianRational:
    """Exact complex rational number."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            re, im = re.re, re.im + Fraction(im)
        if isinstance(re, float) or isinstance(im, float):
            raise TypeError("floating point coefficients are not allowed")
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _make(re: Fraction, im: Fraction) -> GaussianRational:
        g = object.__new__(GaussianRational)
        g.re = re
        g.im = im
        return g

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __neg__(self):
        return GaussianRational._make(-self.re, -self.im)

    def __add__(self, other):
        o = as_coefficient(other)
        return GaussianRational._make(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = as_coefficient(other)
        return GaussianRational._make(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return as_coefficient(other) - self

    def __mul__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, (int, Fraction)):
                return GaussianRational._make(self.re * other, self.im * other)
            return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return GaussianRational._make(a * c, b)
        return GaussianRational._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self):
        return GaussianRational._make(self.re, -self.im)

    def inverse(self):
        n = self.re * self.re + self.im * self.im
        if not n:
            raise ZeroDivisionError("division by zero coefficient")
        return GaussianRational._make(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * as_coefficient(other).inverse()

    def __rtruediv__(self, other):
        return as_coefficient(other) * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        return format_coefficient(self)


Coefficient = Union[int, Fraction, GaussianRational]

ZERO = GaussianRational._make(Fraction(0), Fraction(0))
ONE = GaussianRational._make(Fraction(1), Fraction(0))
I = GaussianRational._make(Fraction(0), Fraction(1))


def as_coefficient(c) -> GaussianRational:
    if isinstance(c, GaussianRational):
        return c
    if isinstance(c, (int, Fraction)) and not isinstance(c, bool):
        return GaussianRational._make(Fraction(c), Fraction(0))
    if isinstance(c, complex):
        raise TypeError("floating point coefficients are not allowed")
    raise TypeError(f"cannot use {c!r} as an exact coefficient")


def format_coefficient(c: GaussianRational) -> str:
    """``3``, ``-1/2``, ``i``, ``-2*i``, ``(1+2*i)``."""

    def q(x: Fraction) -> str:
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    if not c.im:
        return q(c.re)
    if not c.re:
        if c.im == 1:
            return "i"
        if c.im == -1:
            return "-i"
        return f"{q(c.im)}*i"
    im = "i" if c.im == 1 else "-i" if c.im == -1 else f"{q(c.im)}*i"
    sign = "" if im.startswith("-") else "+"
    return f"({q(c.re)}{sign}{im})"


class Var(NamedTuple):
    """A variable: kind, owning space, coordinate index, display name.

    ``index`` is an int, except for jet placeholders where it is the
    multi-index of the derivative the placeholder stands for.
    """

    kind: int
    space: str
    index: object
    name: str

    def __str__(self):
        return self.name


VariableId = Var
HBAR = Var(HBAR_KIND, "", 0, "hbar")

Monomial = tuple  # tuple[tuple[Var, int], ...]


@dataclass(frozen=True)
class TruncationPolicy:
    """Maximal total degree per variable kind; ``None`` means unbounded.

    For ``hbar`` the bound is on the exponent.
    """

    position: int | None = None
    velocity: int | None = None
    momentum: int | None = None
    hbar: int | None = None

    def bound(self, kind: int) -> int | None:
        if kind == POSITION:
            return self.position
        if kind == VELOCITY:
            return self.velocity
        if kind == MOMENTUM:
            return self.momentum
        if kind == HBAR_KIND:
            return self.hbar
        return None

    @property
    def unbounded(self) -> bool:
        return self.position is None and self.velocity is None and self.momentum is None and self.hbar is None

    def combine(self, other: TruncationPolicy) -> TruncationPolicy:
        if self is other or other.unbounded:
            return self
        if self.unbounded:
            return other

        def m(a, b):
            if a is None:
                return b
            if b is None:
                return a
            return min(a, b)

        return TruncationPolicy(
            m(self.position, other.position),
            m(self.velocity, other.velocity),
            m(self.momentum, other.momentum),
            m(self.hbar, other.hbar),
        )

    def admits(self, mono: Monomial) -> bool:
        if self.unbounded:
            return True
        deg = [0, 0, 0, 0, 0]
        for v, e in mono:
            deg[v.kind] += e
        for kind in (POSITION, VELOCITY, MOMENTUM, HBAR_KIND):
            b = self.bound(kind)
            if b is not None and deg[kind] > b:
                return False
        return True


UNBOUNDED = TruncationPolicy()


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        n = d.get(v, 0) + e
        if n:
            d[v] = n
        else:
            del d[v]
    return tuple(sorted(d.items()))


def mono_degree(mono: Monomial, kinds: Iterable[int] | None = None) -> int:
    if kinds is None:
        return sum(e for _, e in mono)
    ks = set(kinds)
    return sum(e for v, e in mono if v.kind in ks)


def mono_sort_key(mono: Monomial):
    # graded lex descending: higher total degree first, then lex on exponents
    return (-sum(e for _, e in mono), tuple((v, -e) for v, e in mono) + ((Var(99, "", 0, ""), 0),))


def _merge_vars(a: tuple, b: tuple) -> tuple:
    if a is b or a == b:
        return a
    if not b:
        return a
    if not a:
        return b
    merged = tuple(sorted(set(a) | set(b)))
    names = [v.name for v in merged]
    if len(set(names)) != len(names):
        seen = {}
        for v in merged:
            if v.name in seen and seen[v.name] != v:
                raise VariableSpaceMismatch(
                    f"variable-space mismatch: {v.name!r} denotes both {seen[v.name]} and {v}"
                )
            seen[v.name] = v
    return merged


class SeriesElement:
    """A multivariate (Laurent in hbar) polynomial or truncated series.

    Build elements with :meth:`var`, :meth:`constant` or arithmetic; the
    constructor takes a mapping from monomials to coefficients.
    """

    __slots__ = ("_terms", "_vars", "_policy", "_hash")

    def __init__(
        self,
        terms: Mapping[Monomial, Coefficient] | Iterable = (),
        variables: Iterable[Var] = (),
        policy: TruncationPolicy = UNBOUNDED,
    ):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict = {}
        seen = set(variables)
        for mono, c in items:
            mono = tuple(sorted((v, e) for v, e in mono if e))
            for v, e in mono:
                if e < 0 and v.kind != HBAR_KIND:
                    raise ValueError(f"negative exponent for {v.name}")
                seen.add(v)
            c = as_coefficient(c)
            if not c:
                continue
            if mono in clean:
                c = clean[mono] + c
                if not c:
                    del clean[mono]
                    continue
            clean[mono] = c
        self._vars = _merge_vars(tuple(sorted(seen)), ())
        self._policy = policy
        self._terms = {m: c for m, c in clean.items() if policy.admits(m)}
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, variables: tuple, policy: TruncationPolicy) -> SeriesElement:
        s = object.__new__(cls)
        s._terms = terms
        s._vars = variables
        s._policy = policy
        s._hash = None
        return s

    @classmethod
    def var(cls, v: Var, variables: Iterable[Var] = (), policy: TruncationPolicy = UNBOUNDED):
        return cls({((v, 1),): 1}, tuple(variables) + (v,), policy)

    @classmethod
    def constant(cls, c: Coefficient, variables: Iterable[Var] = (), policy: TruncationPolicy = UNBOUNDED):
        return cls({(): c}, variables, policy)

    @classmethod
    def zero(cls, variables: Iterable[Var] = (), policy: TruncationPolicy = UNBOUNDED):
        return cls({}, variables, policy)

    # -- inspection ---------------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, GaussianRational]:
        return MappingProxyType(self._terms)

    @property
    def variables(self) -> tuple:
        return self._vars

    @property
    def policy(self) -> TruncationPolicy:
        return self._policy

    def free_variables(self) -> tuple:
        fv = set()
        for mono in self._terms:
            for v, _ in mono:
                fv.add(v)
        return tuple(sorted(fv))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_term(self) -> GaussianRational:
        return self._terms.get((), ZERO)

    def coefficient(self, mono: Monomial) -> GaussianRational:
        return self._terms.get(tuple(sorted(mono)), ZERO)

    def sorted_terms(self) -> list:
        return sorted(self._terms.items(), key=lambda t: mono_sort_key(t[0]))

    def valuation(self, v: Var) -> int | None:
        """Smallest exponent of ``v`` among the terms (None for zero)."""
        if not self._terms:
            return None
        return min(dict(m).get(v, 0) for m in self._terms)

    def max_exponent(self, v: Var) -> int | None:
        if not self._terms:
            return None
        return max(dict(m).get(v, 0) for m in self._terms)

    def degree(self, kinds: Iterable[int] | None = None) -> int:
        """Largest total degree over variables of the given kinds (all by default)."""
        if not self._terms:
            return -1
        ks = None if kinds is None else tuple(kinds)
        return max(mono_degree(m, ks) for m in self._terms)

    def min_degree(self, kinds: Iterable[int] | None = None) -> int | None:
        if not self._terms:
            return None
        ks = None if kinds is None else tuple(kinds)
        return min(mono_degree(m, ks) for m in self._terms)

    # -- structural ---------------------------------------------------------

    def with_variables(self, variables: Iterable[Var]) -> SeriesElement:
        return SeriesElement._raw(self._terms, _merge_vars(self._vars, tuple(sorted(set(variables)))), self._policy)

    def truncate(self, policy: TruncationPolicy) -> SeriesElement:
        p = self._policy.combine(policy)
        if p == self._policy:
            return self
        return SeriesElement._raw({m: c for m, c in self._terms.items() if p.admits(m)}, self._vars, p)

    def with_policy(self, policy: TruncationPolicy) -> SeriesElement:
        """Replace the policy (dropping terms it does not admit)."""
        return SeriesElement._raw({m: c for m, c in self._terms.items() if policy.admits(m)}, self._vars, policy)

    def filter(self, keep: Callable[[Monomial], bool]) -> SeriesElement:
        return SeriesElement._raw({m: c for m, c in self._terms.items() if keep(m)}, self._vars, self._policy)

    def truncate_weighted(self, weights: Mapping[int, int], max_weight: int) -> SeriesElement:
        """Drop monomials whose weight (sum of kind-weight * exponent) exceeds ``max_weight``."""
        return self.filter(lambda m: sum(weights.get(v.kind, 0) * e for v, e in m) <= max_weight)

    def map_coefficients(self, f: Callable[[GaussianRational], Coefficient]) -> SeriesElement:
        out = {}
        for m, c in self._terms.items():
            c2 = as_coefficient(f(c))
            if c2:
                out[m] = c2
        return SeriesElement._raw(out, self._vars, self._policy)

    def split(self, variables: Iterable[Var]) -> dict:
        """Collect by monomials in ``variables``: ``{monomial: coefficient series}``."""
        vs = set(variables)
        out: dict = {}
        for m, c in self._terms.items():
            inner = tuple((v, e) for v, e in m if v in vs)
            outer = tuple((v, e) for v, e in m if v not in vs)
            out.setdefault(inner, {})[outer] = c
        rest = tuple(v for v in self._vars if v not in vs)
        return {k: SeriesElement._raw(t, rest, self._policy) for k, t in out.items()}

    def at_hbar_zero(self) -> SeriesElement:
        v = self.valuation(HBAR)
        if v is not None and v < 0:
            raise MathDomainError("cannot set hbar = 0 in a series with negative hbar powers")
        return self.filter(lambda m: all(v != HBAR for v, _ in m))

    def hbar_part(self, k: int) -> SeriesElement:
        """Coefficient of hbar^k (a series without hbar)."""
        out = {}
        for m, c in self._terms.items():
            e = 0
            rest = []
            for v, x in m:
                if v == HBAR:
                    e = x
                else:
                    rest.append((v, x))
            if e == k:
                out[tuple(rest)] = c
        return SeriesElement._raw(out, self._vars, self._policy)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> SeriesElement | None:
        if isinstance(other, SeriesElement):
            return other
        try:
            c = as_coefficient(other)
        except TypeError:
            return None
        return SeriesElement._raw({(): c} if c else {}, (), UNBOUNDED)

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _add(self, o, ONE)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _add(self, o, -ONE)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _add(o, self, -ONE)

    def __neg__(self):
        return SeriesElement._raw({m: -c for m, c in self._terms.items()}, self._vars, self._policy)

    def scale(self, c: Coefficient) -> SeriesElement:
        c = as_coefficient(c)
        if not c:
            return SeriesElement._raw({}, self._vars, self._policy)
        return SeriesElement._raw({m: x * c for m, x in self._terms.items()}, self._vars, self._policy)

    def __mul__(self, other):
        if not isinstance(other, SeriesElement):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        return _mul(self, other)

    def __rmul__(self, other):
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, SeriesElement):
            return self * other.monomial_inverse()
        return self.scale(as_coefficient(other).inverse())

    def monomial_inverse(self) -> SeriesElement:
        """Inverse of a single-term element whose monomial involves only hbar."""
        if len(self._terms) != 1:
            raise MathDomainError("division by a non-monomial series")
        (m, c), = self._terms.items()
        if any(v != HBAR for v, _ in m):
            raise MathDomainError("division is only defined by constants and powers of hbar")
        return SeriesElement._raw({tuple((v, -e) for v, e in m): c.inverse()}, self._vars, self._policy)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.monomial_inverse() ** (-k)
        out = SeriesElement._raw({(): ONE}, self._vars, self._policy)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    # -- calculus -----------------------------------------------------------

    def differentiate(self, v: Var) -> SeriesElement:
        if v not in self._vars:
            raise UnknownVariable(f"unknown variable {v.name!r} for differentiation")
        out = {}
        for m, c in self._terms.items():
            for j, (w, e) in enumerate(m):
                if w == v:
                    nm = m[:j] + ((w, e - 1),) + m[j + 1 :] if e != 1 else m[:j] + m[j + 1 :]
                    c2 = c * e
                    if nm in out:
                        c2 = out[nm] + c2
                        if not c2:
                            del out[nm]
                            break
                    out[nm] = c2
                    break
        return SeriesElement._raw(out, self._vars, self._policy)

    diff = differentiate

    def substitute(self, assignment: Mapping[Var, SeriesElement | Coefficient]) -> SeriesElement:
        return Substitution(assignment)(self)

    def evaluate(self, point: Mapping[Var, Coefficient]):
        """Exact value at a point (all free variables must be assigned)."""
        total = ZERO
        for m, c in self._terms.items():
            t = c
            for v, e in m:
                if v not in point:
                    raise UnknownVariable(f"no value for {v.name!r}")
                t = t * as_coefficient(point[v]) ** e
            total = total + t
        return total

    # -- comparison / display -----------------------------------------------

    def __eq__(self, other):
        if isinstance(other, SeriesElement):
            return self._terms == other._terms
        try:
            c = as_coefficient(other)
        except TypeError:
            return NotImplemented
        if not c:
            return not self._terms
        return len(self._terms) == 1 and self._terms.get(()) == c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __iter__(self) -> Iterator:
        return iter(self.sorted_terms())

    def __repr__(self):
        return f"SeriesElement({to_text(self)})"

    def __str__(self):
        return to_text(self)


def _add(a: SeriesElement, b: SeriesElement, sign: GaussianRational) -> SeriesElement:
    variables = _merge_vars(a._vars, b._vars)
    policy = a._policy.combine(b._policy)
    out = dict(a._terms)
    neg = sign is not ONE
    for m, c in b._terms.items():
        if neg:
            c = -c
        if m in out:
            c = out[m] + c
            if not c:
                del out[m]
                continue
        out[m] = c
    if not policy.unbounded and (policy != a._policy or policy != b._policy):
        out = {m: c for m, c in out.items() if policy.admits(m)}
    return SeriesElement._raw(out, variables, policy)


def _mul(a: SeriesElement, b: SeriesElement) -> SeriesElement:
    variables = _merge_vars(a._vars, b._vars)
    policy = a._policy.combine(b._policy)
    out: dict = {}
    bt = b._terms
    check = not policy.unbounded
    for m1, c1 in a._terms.items():
        for m2, c2 in bt.items():
            m = mono_mul(m1, m2)
            if check and not policy.admits(m):
                continue
            c = c1 * c2
            if m in out:
                c = out[m] + c
                if not c:
                    del out[m]
                    continue
            out[m] = c
    return SeriesElement._raw(out, variables, policy)


def as_series(x) -> SeriesElement:
    if isinstance(x, SeriesElement):
        return x
    return SeriesElement.constant(x)


class Substitution:
    """Reusable substitution ``v -> expression`` with a cache of powers."""

    def __init__(self, assignment: Mapping[Var, SeriesElement | Coefficient]):
        self.assignment = {v: as_series(e) for v, e in assignment.items()}
        self._powers: dict = {}
        pol = UNBOUNDED
        vs: tuple = ()
        for e in self.assignment.values():
            pol = pol.combine(e.policy)
            vs = _merge_vars(vs, e.variables)
        self._policy = pol
        self._vars = vs

    def _power(self, v: Var, k: int) -> SeriesElement:
        key = (v, k)
        p = self._powers.get(key)
        if p is None:
            e = self.assignment[v]
            if k < 0:
                p = e.monomial_inverse() ** (-k)
            elif k == 1:
                p = e
            elif k % 2 == 0:
                h = self._power(v, k // 2)
                p = h * h
            else:
                p = self._power(v, k - 1) * e
            self._powers[key] = p
        return p

    def __call__(self, f: SeriesElement) -> SeriesElement:
        asg = self.assignment
        if not any(v in asg for v in f._vars):
            return f
        for v, e in asg.items():
            if v in f._vars and f._policy.bound(v.kind) is not None and e.constant_term():
                raise DivergentSubstitution(
                    f"divergent substitution: {v.name} is truncated and its replacement has a constant term"
                )
        policy = f._policy.combine(self._policy)
        rest = tuple(v for v in f._vars if v not in asg)
        variables = _merge_vars(rest, self._vars)
        check = not policy.unbounded
        out: dict = {}
        for m, c in f._terms.items():
            fixed = []
            subs = []
            for v, e in m:
                if v in asg:
                    subs.append((v, e))
                else:
                    fixed.append((v, e))
            fixed = tuple(fixed)
            if not subs:
                items = (((), ONE),)
            else:
                prod = self._power(*subs[0])
                for v, e in subs[1:]:
                    prod = _mul(prod, self._power(v, e)).truncate(policy) if check else _mul(prod, self._power(v, e))
                items = prod._terms.items()
            for m2, c2 in items:
                mm = mono_mul(fixed, m2)
                if check and not policy.admits(mm):
                    continue
                cc = c * c2
                if mm in out:
                    cc = out[mm] + cc
                    if not cc:
                        del out[mm]
                        continue
                out[mm] = cc
        return SeriesElement._raw(out, variables, policy)


def differentiate(f: SeriesElement, v: Var) -> SeriesElement:
    return f.differentiate(v)


def substitute(f: SeriesElement, assignment: Mapping[Var, SeriesElement | Coefficient]) -> SeriesElement:
    return f.substitute(assignment)


def series_exp(f: SeriesElement, weights: Mapping[int, int], max_weight: int) -> SeriesElement:
    """exp(f) truncated at weighted degree ``max_weight``.

    Every term of ``f`` must have positive weight so the sum is finite.
    """
    f = f.truncate_weighted(weights, max_weight)
    if f.is_zero():
        return SeriesElement.constant(1, f.variables, f.policy)
    minw = min(sum(weights.get(v.kind, 0) * e for v, e in m) for m in f.terms)
    if minw <= 0:
        raise MathDomainError("exponential of a series with a term of non-positive weight")
    total = SeriesElement.constant(1, f.variables, f.policy)
    power = total
    for k in range(1, max_weight // minw + 1):
        power = (power * f).truncate_weighted(weights, max_weight).scale(Fraction(1, k))
        if power.is_zero():
            break
        total = total + power
    return total


def solve_linear(matrix: list, rhs: list) -> list:
    """Solve ``matrix @ x = rhs`` exactly over Gaussian rationals.

    ``rhs`` entries may be coefficients or series; raises NonInvertibleJet
    when the matrix is singular.
    """
    n = len(matrix)
    a = [[as_coefficient(x) for x in row] for row in matrix]
    if any(len(row) != n for row in a):
        raise NonInvertibleJet("non-invertible jet: Jacobian is not square")
    b = [r if isinstance(r, SeriesElement) else as_coefficient(r) for r in rhs]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise NonInvertibleJet("non-invertible jet: singular linear part")
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = a[col][col].inverse()
        a[col] = [x * inv for x in a[col]]
        b[col] = b[col] * inv
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
                b[r] = b[r] - b[col] * f
    return b


def linear_part(components: list, source: list) -> list:
    """Matrix of linear coefficients: entry (i, a) = [x_a] m_i."""
    return [[m.coefficient(((s, 1),)) for s in source] for m in components]


def jet_invert(components: list, source: list, target: list, order: int = 6) -> list:
    """Invert a basepoint-centred jet ``y_i = m_i(x)``.

    Returns ``x_a = n_a(y)`` with ``m(n(y)) = y`` to degree ``order``.  When the
    inverse turns out to be an exact polynomial (e.g. triangular maps) the
    result is returned untruncated.
    """
    components = [as_series(m) for m in components]
    if len(components) != len(source) or len(target) != len(source):
        raise NonInvertibleJet("non-invertible jet: dimensions do not match")
    for m in components:
        if m.constant_term():
            raise NonInvertibleJet("non-invertible jet: nonzero constant term")
    a = linear_part(components, source)
    ys = [SeriesElement.var(t) for t in target]
    higher = [m - sum((m.coefficient(((s, 1),)) * SeriesElement.var(s) for s in source), SeriesElement.zero())
              for m in components]
    policy = TruncationPolicy(position=order)
    n = solve_linear(a, ys)
    n = [x.with_policy(policy) for x in n]
    for _ in range(order):
        subst = Substitution(dict(zip(source, n)))
        q = [subst(h.with_policy(policy)) for h in higher]
        n = solve_linear(a, [y - qq for y, qq in zip(ys, q)])
        n = [x.with_policy(policy) for x in n]
    exact = [x.with_policy(UNBOUNDED) for x in n]
    back = Substitution(dict(zip(source, exact)))
    if all(back(m) == y for m, y in zip(components, ys)):
        return exact
    return n


def to_text(f: SeriesElement) -> str:
    if not f._terms:
        return "0"
    parts = []
    for mono, c in f.sorted_terms():
        mono_txt = "*".join(v.name if e == 1 else f"{v.name}^{e}" for v, e in mono)
        if not mono_txt:
            txt = format_coefficient(c)
        elif c == 1:
            txt = mono_txt
        elif c == -1:
            txt = "-" + mono_txt
        else:
            txt = f"{format_coefficient(c)}*{mono_txt}"
        parts.append(txt)
    out = parts[0]
    for p in parts[1:]:
        if p.startswith("-"):
            out += " - " + p[1:]
        else:
            out += " + " + p
    return out


def random_series(rng, variables: list, max_degree: int, n_terms: int, complex_coeffs: bool = False,
                  max_num: int = 5) -> SeriesElement:
    """Random polynomial for property tests (rational points, exact)."""
    terms = {}
    for _ in range(n_terms):
        d = rng.randint(0, max_degree)
        mono = {}
        for _ in range(d):
            if not variables:
                break
            v = rng.choice(variables)
            mono[v] = mono.get(v, 0) + 1
        re = Fraction(rng.randint(-max_num, max_num), rng.randint(1, 3))
        im = Fraction(rng.randint(-max_num, max_num), rng.randint(1, 3)) if complex_coeffs else 0
        terms[tuple(sorted(mono.items()))] = GaussianRational(re, im)
    return SeriesElement(terms, variables)


def factorial(n: int) -> int:
    return math.factorial(n)
