"""Formal hbar-differential operators over (possibly hbar-perturbed) maps.

Operators are stored in the derivative basis

    L = sum_alpha C_alpha(x, hbar) * d_y^alpha,  followed by y -> phi_hbar(x),

with nonnegative hbar powers.  The p-hat basis, ``p_hat = -i*hbar*d``, has
coefficients ``L_alpha = C_alpha * (i/hbar)^|alpha|``, which may be Laurent in
hbar.  The degree of a monomial is its hbar exponent in the derivative basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from mfc.diffop import (
    OperatorOverMap,
    _clean_table,
    compose_tables,
    madd,
    mi_factorial,
    multi_indices,
    partial,
    render_table,
    unit,
)
from mfc.errors import MathDomainError, NonFormalPhase, NotInSymbolClass, SpaceMismatch
from mfc.geometry import CoordinateChange, PolyMap, Space, compose_maps
from mfc.ring import (
    HBAR,
    I,
    ONE,
    SeriesElement,
    Substitution,
    TruncationPolicy,
    as_series,
    random_series,
)

MINUS_I_HBAR = SeriesElement({((HBAR, 1),): -I})
I_OVER_HBAR = SeriesElement({((HBAR, -1),): I})


class NotHomogeneous(ValueError):
    pass


def _hbar_policy(nh):
    return TruncationPolicy(hbar=nh)


class HbarOperator:
    """A formal hbar-differential operator over ``carrier``.

    ``nh`` bounds the hbar exponent kept in the coefficients (None keeps
    everything).  ``phase`` is an optional function ``Theta`` on the source;
    when present the operator is ``exp((i/hbar) Theta) * L`` and only
    algebraic manipulations that do not need to expand the phase are allowed.
    """

    __slots__ = ("carrier", "dcoeffs", "nh", "phase")

    def __init__(self, carrier: PolyMap, dcoeffs: Mapping, nh: int | None = None, phase=None):
        table = _clean_table(dcoeffs, carrier.target.dim)
        pol = _hbar_policy(nh)
        for alpha, c in list(table.items()):
            c = carrier.source.function(c)
            v = c.valuation(HBAR)
            if v is not None and v < 0:
                raise MathDomainError("derivative-basis coefficients must have nonnegative hbar powers")
            c = c.truncate(pol) if nh is not None else c
            if c.is_zero():
                del table[alpha]
            else:
                table[alpha] = c
        if phase is not None:
            phase = carrier.source.function(phase)
            if phase.is_zero():
                phase = None
        self.carrier = carrier
        self.dcoeffs = table
        self.nh = nh
        self.phase = phase

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_pbasis(cls, carrier: PolyMap, pcoeffs: Mapping, nh: int | None = None, phase=None) -> HbarOperator:
        table = {}
        for alpha, c in _clean_table(pcoeffs, carrier.target.dim).items():
            table[alpha] = as_series(c) * MINUS_I_HBAR ** sum(alpha)
        return cls(carrier, table, nh, phase)

    @classmethod
    def from_classical(cls, L: OperatorOverMap, nh: int | None = None) -> HbarOperator:
        return cls(L.carrier, L.coeffs, nh)

    @classmethod
    def pullback(cls, carrier: PolyMap, nh: int | None = None) -> HbarOperator:
        return cls(carrier, {tuple(0 for _ in range(carrier.target.dim)): 1}, nh)

    @classmethod
    def multiplication(cls, space: Space, f, nh: int | None = None) -> HbarOperator:
        return cls(PolyMap.identity(space), {tuple(0 for _ in range(space.dim)): f}, nh)

    @classmethod
    def p_hat(cls, space: Space, i: int = 0, carrier: PolyMap | None = None) -> HbarOperator:
        carrier = PolyMap.identity(space) if carrier is None else carrier
        return cls(carrier, {unit(carrier.target.dim, i): MINUS_I_HBAR})

    # -- basic structure ----------------------------------------------------

    @property
    def source(self) -> Space:
        return self.carrier.source

    @property
    def target(self) -> Space:
        return self.carrier.target

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.dcoeffs), default=-1)

    def is_zero(self) -> bool:
        return not self.dcoeffs

    def hbar_valuation(self) -> int | None:
        vals = [c.valuation(HBAR) for c in self.dcoeffs.values()]
        return min(vals) if vals else None

    def pbasis(self) -> PBasisView:
        return PBasisView(
            self.carrier,
            {a: c * I_OVER_HBAR ** sum(a) for a, c in self.dcoeffs.items()},
            self.nh,
            self.phase,
        )

    def truncated(self, nh: int | None) -> HbarOperator:
        return HbarOperator(self.carrier, self.dcoeffs, _min_nh(self.nh, nh), self.phase)

    def _check_same(self, other: HbarOperator):
        if self.carrier != other.carrier:
            raise SpaceMismatch("operators over different maps cannot be added")
        if self.phase != other.phase:
            raise NonFormalPhase("operators with different phases cannot be added")

    def __add__(self, other: HbarOperator) -> HbarOperator:
        self._check_same(other)
        t = dict(self.dcoeffs)
        for a, c in other.dcoeffs.items():
            t[a] = t[a] + c if a in t else c
        return HbarOperator(self.carrier, t, _min_nh(self.nh, other.nh), self.phase)

    def __sub__(self, other: HbarOperator) -> HbarOperator:
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> HbarOperator:
        """Multiply by a scalar or a function of hbar with nonnegative powers."""
        return HbarOperator(self.carrier, {a: x * c for a, x in self.dcoeffs.items()}, self.nh, self.phase)

    def divide_by_hbar(self) -> HbarOperator:
        """``L / hbar``; every coefficient must have hbar-valuation >= 1."""
        v = self.hbar_valuation()
        if v is not None and v < 1:
            raise MathDomainError("operator is not divisible by hbar")
        inv = SeriesElement({((HBAR, -1),): 1})
        nh = None if self.nh is None else self.nh - 1
        return HbarOperator(self.carrier, {a: c * inv for a, c in self.dcoeffs.items()}, nh, self.phase)

    def premultiply(self, f) -> HbarOperator:
        f = self.source.function(f)
        return HbarOperator(self.carrier, {a: f * c for a, c in self.dcoeffs.items()}, self.nh, self.phase)

    def __call__(self, g):
        return hbar_apply(self, g)

    def __matmul__(self, other: HbarOperator) -> HbarOperator:
        return hbar_compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, HbarOperator):
            return NotImplemented
        return self.carrier == other.carrier and self.dcoeffs == other.dcoeffs and self.phase == other.phase

    def __hash__(self):
        return hash((self.carrier, frozenset(self.dcoeffs.items())))

    def __str__(self):
        body = f"{render_table(self.dcoeffs, self.target)} over {self.carrier}"
        if self.phase is not None:
            return f"exp(i/hbar*({self.phase})) * {body}"
        return body

    __repr__ = __str__


def _min_nh(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True, eq=False)
class PBasisView:
    """``L = sum L_alpha p_hat^alpha``; coefficients are Laurent in hbar."""

    carrier: PolyMap
    table: Mapping
    nh: int | None = None
    phase: SeriesElement | None = None

    def to_operator(self) -> HbarOperator:
        return HbarOperator.from_pbasis(self.carrier, self.table, self.nh, self.phase)

    def min_hbar_power(self) -> int | None:
        vals = [c.valuation(HBAR) for c in self.table.values()]
        return min(vals) if vals else None

    def __str__(self):
        return f"{render_table(self.table, self.carrier.target, head='p')} over {self.carrier}"


def _require_no_phase(L: HbarOperator, what: str):
    if L.phase is not None:
        raise NonFormalPhase(f"{what} is undefined for an operator with a non-formal phase exp(i/hbar*({L.phase}))")


def hbar_apply(L: HbarOperator, g) -> SeriesElement:
    _require_no_phase(L, "application")
    g = L.target.function(g)
    sub = L.carrier.substitution()
    total = SeriesElement.zero(L.source.positions)
    for alpha, c in L.dcoeffs.items():
        total = total + c * sub(partial(g, L.target, alpha))
    if L.nh is not None:
        total = total.truncate(_hbar_policy(L.nh))
    return total


def hbar_compose(L: HbarOperator, K: HbarOperator) -> HbarOperator:
    """``L o K`` over ``K.carrier o L.carrier``."""
    if K.phase is not None:
        raise NonFormalPhase("composition with an operator carrying a non-formal phase on the right")
    nh = _min_nh(L.nh, K.nh)
    inner = K.dcoeffs
    if nh is not None:
        inner = {a: c.truncate(_hbar_policy(nh)) for a, c in inner.items()}
    table = compose_tables(L.carrier, L.dcoeffs, K.carrier, inner)
    return HbarOperator(compose_maps(L.carrier, K.carrier), table, nh, L.phase)


def over_classical_carrier(L: HbarOperator) -> HbarOperator:
    """Re-express ``L`` over ``phi_0 = phi_hbar|_{hbar=0}``.

    Uses ``g(phi_0 + delta) = sum_beta delta^beta / beta! * d^beta g(phi_0)``
    where ``delta`` is divisible by hbar; needs a finite ``nh``.
    """
    if L.carrier.is_classical:
        return L
    if L.nh is None:
        raise MathDomainError("expanding an hbar-perturbed carrier needs a finite hbar truncation")
    phi0 = L.carrier.classical()
    delta = [c - c0 for c, c0 in zip(L.carrier.components, phi0.components)]
    pol = _hbar_policy(L.nh)
    m = L.target.dim
    out: dict = {}
    for beta in multi_indices(m, L.nh):
        w = SeriesElement.constant(1, L.source.positions).truncate(pol)
        for k, b in enumerate(beta):
            w = (w * delta[k] ** b).truncate(pol)
        if w.is_zero():
            continue
        w = w.scale(ONE / mi_factorial(beta))
        for alpha, c in L.dcoeffs.items():
            gamma = madd(alpha, beta)
            t = (c * w).truncate(pol)
            out[gamma] = out[gamma] + t if gamma in out else t
    return HbarOperator(phi0, out, L.nh, L.phase)


def graded_components(L: HbarOperator) -> dict:
    """Homogeneous pieces ``{k: L_[k]}`` (degree = hbar exponent in the derivative basis)."""
    L = over_classical_carrier(L)
    pieces: dict = {}
    for alpha, c in L.dcoeffs.items():
        for m, x in c.terms.items():
            k = dict(m).get(HBAR, 0)
            pieces.setdefault(k, {}).setdefault(alpha, {})[m] = x
    return {
        k: HbarOperator(
            L.carrier,
            {a: SeriesElement(t, L.source.positions) for a, t in tab.items()},
            L.nh,
            L.phase,
        )
        for k, tab in sorted(pieces.items())
    }


def degrees(L: HbarOperator) -> list:
    return sorted(graded_components(L))


def degree(L: HbarOperator) -> int:
    """Degree of a homogeneous operator; raises ``NotHomogeneous`` otherwise."""
    ds = degrees(L)
    if len(ds) != 1:
        raise NotHomogeneous(f"operator is not homogeneous (degrees {ds})")
    return ds[0]


def transform_coordinates(
    L: HbarOperator,
    target: CoordinateChange | None = None,
    source: CoordinateChange | None = None,
) -> HbarOperator:
    """Express ``L`` in new coordinates on its target and/or source.

    A target change ``y' = c(y)`` gives ``L' = L o c^*``; a source change
    ``x' = e(x)`` gives ``L' = (e^{-1})^* o L``.
    """
    out = L
    if target is not None:
        if target.source != L.target:
            raise SpaceMismatch(f"space mismatch: change is on {target.source.name}, operator targets {L.target.name}")
        out = hbar_compose(out, HbarOperator.pullback(target.map))
    if source is not None:
        if source.source != L.source:
            raise SpaceMismatch(f"space mismatch: change is on {source.source.name}, operator lives on {L.source.name}")
        out = hbar_compose(HbarOperator.pullback(source.inverse, out.nh), out)
    return out


def in_symbol_class(L: HbarOperator) -> bool:
    v = L.pbasis().min_hbar_power()
    return v is None or v >= 0


def principal_symbol(L: HbarOperator):
    """``symb(L) = sum L_alpha(x, 0) p^alpha`` on ``phi_0^* T^* M2``."""
    from mfc.symbols import SymbolFunction

    _require_no_phase(L, "the principal symbol")
    view = L.pbasis()
    v = view.min_hbar_power()
    if v is not None and v < 0:
        raise NotInSymbolClass("not-in-symbol-class: p-hat coefficients have negative hbar powers")
    ps = L.target.momenta
    base = L.carrier.classical()
    total = SeriesElement.zero(L.source.positions + ps)
    for alpha, c in view.table.items():
        mono = SeriesElement.constant(1, ps)
        for k, a in enumerate(alpha):
            mono = mono * SeriesElement.var(ps[k]) ** a
        total = total + c.at_hbar_zero() * mono
    return SymbolFunction(base, total)


class PlaneWave:
    """``A * exp((i/hbar) * phase)`` with ``phase`` linear in the momenta.

    ``d/dy^i (A E) = (d_i A + (i/hbar) (d_i phase) A) E``.
    """

    __slots__ = ("amplitude", "phase", "space")

    def __init__(self, amplitude: SeriesElement, phase: SeriesElement, space: Space):
        self.amplitude = amplitude
        self.phase = phase
        self.space = space

    @classmethod
    def unit(cls, space: Space) -> PlaneWave:
        """``exp((i/hbar) y.p)`` on ``space``."""
        xs, ps = space.positions, space.momenta
        phase = SeriesElement.zero(xs + ps)
        for x, p in zip(xs, ps):
            phase = phase + SeriesElement.var(x) * SeriesElement.var(p)
        return cls(SeriesElement.constant(1, xs + ps + (HBAR,)), phase, space)

    def differentiate(self, i: int) -> PlaneWave:
        y = self.space.position(i)
        a = self.amplitude.differentiate(y) + I_OVER_HBAR * self.phase.differentiate(y) * self.amplitude
        return PlaneWave(a, self.phase, self.space)

    def substitute(self, sub: Substitution) -> PlaneWave:
        return PlaneWave(sub(self.amplitude), sub(self.phase), self.space)


def full_symbol_basis(L: HbarOperator) -> SeriesElement:
    """Read ``sum L_alpha p^alpha`` off the p-hat basis."""
    _require_no_phase(L, "the full symbol")
    ps = L.target.momenta
    total = SeriesElement.zero(L.source.positions + ps)
    for alpha, c in L.pbasis().table.items():
        mono = SeriesElement.constant(1, ps)
        for k, a in enumerate(alpha):
            mono = mono * SeriesElement.var(ps[k]) ** a
        total = total + c * mono
    return total


def full_symbol_planewave(L: HbarOperator) -> SeriesElement:
    """``exp(-(i/hbar) phi(x) p) * L(exp((i/hbar) y p))`` evaluated symbolically."""
    _require_no_phase(L, "the full symbol")
    tgt = L.target
    sub = L.carrier.substitution()
    waves = {tuple(0 for _ in range(tgt.dim)): PlaneWave.unit(tgt)}

    def wave(alpha):
        w = waves.get(alpha)
        if w is None:
            k = next(i for i, a in enumerate(alpha) if a)
            w = wave(alpha[:k] + (alpha[k] - 1,) + alpha[k + 1 :]).differentiate(k)
            waves[alpha] = w
        return w

    expected_phase = SeriesElement.zero()
    for c, p in zip(L.carrier.components, tgt.momenta):
        expected_phase = expected_phase + c * SeriesElement.var(p)
    total = SeriesElement.zero(L.source.positions + tgt.momenta)
    for alpha in sorted(L.dcoeffs, key=sum):
        w = wave(alpha).substitute(sub)
        if w.phase != expected_phase:
            raise AssertionError("plane-wave phase does not cancel against exp(-(i/hbar) phi(x) p)")
        total = total + L.dcoeffs[alpha] * w.amplitude
    return total


def full_symbol(L: HbarOperator, method: str = "both") -> SeriesElement:
    """Full symbol relative to the operator's own carrier.

    ``method`` is ``"basis"``, ``"planewave"`` or ``"both"`` (computes both
    and insists they agree).
    """
    if method == "basis":
        return full_symbol_basis(L)
    if method == "planewave":
        return full_symbol_planewave(L)
    a = full_symbol_basis(L)
    b = full_symbol_planewave(L)
    if a != b:
        raise AssertionError(f"full symbol mismatch: basis {a} vs plane wave {b}")
    return a


def hbar_commutator(L: HbarOperator, a) -> HbarOperator:
    """``L o a - phi^*(a) o L``."""
    a = L.target.function(a)
    left = hbar_compose(L, HbarOperator.multiplication(L.target, a, L.nh))
    right = hbar_compose(HbarOperator.multiplication(L.source, L.carrier.pullback(a), L.nh), L)
    return left - right


def hbar_order_oracle(L: HbarOperator, k: int) -> bool:
    """True iff ``L`` is an hbar-differential operator of order <= k.

    Order 0 is the class ``f_0 * phi^*``; for ``k > 0`` every commutator with a
    target coordinate must equal ``-i*hbar*L_1`` with ``L_1`` of order <= k-1.
    """
    _require_no_phase(L, "the hbar-order test")
    if k < 0:
        return L.is_zero()
    comms = [hbar_commutator(L, L.target.coordinate(j)) for j in range(L.target.dim)]
    if k == 0:
        return all(c.is_zero() for c in comms)
    for c in comms:
        v = c.hbar_valuation()
        if v is not None and v < 1:
            return False
        if not hbar_order_oracle(c.divide_by_hbar().scale(I), k - 1):
            return False
    return True


def random_hbar_operator(rng, carrier: PolyMap, max_order: int = 2, coeff_degree: int = 2,
                         max_hbar: int = 1, density: float = 0.6, nh: int | None = None,
                         complex_coeffs: bool = True) -> HbarOperator:
    """Random operator in the symbol class (nonnegative p-hat coefficients)."""
    xs = list(carrier.source.positions)
    table = {}
    for alpha in multi_indices(carrier.target.dim, max_order):
        if rng.random() < density:
            c = SeriesElement.zero(xs)
            for e in range(max_hbar + 1):
                c = c + random_series(rng, xs, coeff_degree, 2, complex_coeffs) * SeriesElement.var(HBAR) ** e
            table[alpha] = c
    return HbarOperator.from_pbasis(carrier, table, nh)
