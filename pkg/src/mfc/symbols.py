"""Functions on pulled-back cotangent bundles and the symbol theorems.

A :class:`SymbolFunction` over ``phi: M1 -> M2`` is a series ``H(x1, p2)``.
Push-forward along ``psi: M2 -> M3`` rewrites the momenta through the
Jacobian of ``psi`` evaluated at ``phi(x1)``; pull-back along ``f: M0 -> M1``
substitutes the base coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

from mfc.errors import SpaceMismatch, SquareNotCommuting, SymbolsDoNotMatch
from mfc.geometry import PolyMap, compose_maps, jacobian
from mfc.ring import HBAR, I, SeriesElement, Substitution


@dataclass(frozen=True, eq=False)
class SymbolFunction:
    """``H(x1, p2)`` (possibly hbar-dependent) on ``base^* T^* M2`` for a classical ``base: M1 -> M2``."""

    base: PolyMap
    series: SeriesElement

    def __post_init__(self):
        if not self.base.is_classical:
            raise ValueError("symbols live over classical maps")
        allowed = set(self.base.source.positions) | set(self.base.target.momenta) | {HBAR}
        bad = [v.name for v in self.series.free_variables() if v not in allowed]
        if bad:
            raise SpaceMismatch(
                f"{', '.join(bad)} are not base coordinates of {self.base.source.name} "
                f"or momenta of {self.base.target.name}"
            )
        object.__setattr__(
            self, "series", self.series.with_variables(self.base.source.positions + self.base.target.momenta)
        )

    def __eq__(self, other):
        if not isinstance(other, SymbolFunction):
            return NotImplemented
        return self.base == other.base and self.series == other.series

    def __hash__(self):
        return hash((self.base, self.series))

    def __mul__(self, other: SymbolFunction) -> SymbolFunction:
        return symbol_product(self, other)

    def __str__(self):
        return str(self.series)


def pushforward(H: SymbolFunction, psi: PolyMap) -> SymbolFunction:
    """``psi_*(H) = H(x1, (d x3 / d x2)^T p3)`` over ``psi o phi``."""
    phi = H.base
    if phi.target != psi.source:
        raise SpaceMismatch(f"space mismatch: symbol over a map into {phi.target.name}, push-forward from {psi.source.name}")
    psi = psi.classical()
    J = jacobian(psi)
    at = phi.substitution()
    p3 = [SeriesElement.var(p) for p in psi.target.momenta]
    assignment = {}
    for i, p2 in enumerate(psi.source.momenta):
        acc = SeriesElement.zero(phi.source.positions)
        for k in range(psi.target.dim):
            acc = acc + at(J[k][i]) * p3[k]
        assignment[p2] = acc
    return SymbolFunction(compose_maps(phi, psi), Substitution(assignment)(H.series))


def pullback_symbol(F: SymbolFunction, f: PolyMap) -> SymbolFunction:
    """``f^*(F) = F(x2(x1), p3)`` over ``F.base o f``."""
    if f.target != F.base.source:
        raise SpaceMismatch(f"space mismatch: symbol over a map from {F.base.source.name}, pull-back into {f.target.name}")
    f = f.classical()
    return SymbolFunction(compose_maps(f, F.base), f.substitution()(F.series))


def symbol_product(H: SymbolFunction, F: SymbolFunction) -> SymbolFunction:
    """``H * F = psi_*(H) * phi^*(F)`` for ``H`` over ``phi`` and ``F`` over ``psi``."""
    if H.base.target != F.base.source:
        raise SpaceMismatch("space mismatch: symbols do not form a chain")
    a = pushforward(H, F.base)
    b = pullback_symbol(F, H.base)
    return SymbolFunction(a.base, a.series * b.series)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    lhs: object
    rhs: object

    def __bool__(self):
        return self.ok


def check_symbprod(L, K) -> CheckResult:
    """Compare ``symb(L o K)`` with ``symb(L) * symb(K)`` exactly."""
    from mfc.hbar import hbar_compose, principal_symbol

    lhs = principal_symbol(hbar_compose(L, K))
    rhs = symbol_product(principal_symbol(L), principal_symbol(K))
    return CheckResult(lhs == rhs, lhs, rhs)


@dataclass(frozen=True, eq=False)
class CommSquare:
    """Operators around a commutative square.

    ::

        M1 --phi21--> M2
        |psi31        |psi42
        M3 --phi43--> M4

    ``L12`` over phi21, ``L34`` over phi43, ``K13`` over psi31, ``K24`` over psi42.
    """

    L12: object
    L34: object
    K13: object
    K24: object

    def __post_init__(self):
        top = compose_maps(self.L12.carrier, self.K24.carrier)
        bottom = compose_maps(self.K13.carrier, self.L34.carrier)
        if top != bottom:
            raise SquareNotCommuting("square does not commute: psi42 o phi21 != phi43 o psi31")

    @property
    def phi21(self) -> PolyMap:
        return self.L12.carrier

    @property
    def phi43(self) -> PolyMap:
        return self.L34.carrier

    @property
    def psi31(self) -> PolyMap:
        return self.K13.carrier

    @property
    def psi42(self) -> PolyMap:
        return self.K24.carrier

    def swapped(self) -> CommSquare:
        """The same square read with the roles of L and K exchanged."""
        return CommSquare(self.K13, self.K24, self.L12, self.L34)


def square_delta(sq: CommSquare):
    """``Delta = L12 o K24 - K13 o L34`` (even case)."""
    from mfc.hbar import hbar_compose

    return hbar_compose(sq.L12, sq.K24) - hbar_compose(sq.K13, sq.L34)


def matching_conditions(sq: CommSquare) -> tuple:
    """``psi42_*(H12) = psi31^*(H34)`` and ``phi21^*(F24) = phi43_*(F13)``."""
    from mfc.hbar import principal_symbol

    H12, H34 = principal_symbol(sq.L12), principal_symbol(sq.L34)
    F24, F13 = principal_symbol(sq.K24), principal_symbol(sq.K13)
    first = pushforward(H12, sq.psi42.classical()) == pullback_symbol(H34, sq.psi31.classical())
    second = pullback_symbol(F24, sq.phi21.classical()) == pushforward(F13, sq.phi43.classical())
    return first, second


def square_bracket(sq: CommSquare) -> SymbolFunction:
    """``{H12, H34; F24, F13} = symb((i/hbar) Delta)``."""
    from mfc.hbar import principal_symbol

    first, second = matching_conditions(sq)
    if not (first and second):
        raise SymbolsDoNotMatch("symbols do not match: " + ("push/pull of H" if not first else "push/pull of F"))
    delta = square_delta(sq)
    if not principal_symbol(delta).series.is_zero():
        raise AssertionError("symb(Delta) should vanish under the matching conditions")
    v = delta.hbar_valuation()
    if v is not None and v < 1:
        raise AssertionError("Delta should be divisible by hbar")
    return principal_symbol(delta.divide_by_hbar().scale(I))


def p_valuation_of_delta(sq: CommSquare) -> int | None:
    """Smallest hbar power among the p-hat coefficients of Delta."""
    return square_delta(sq).pbasis().min_hbar_power()

