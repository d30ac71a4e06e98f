"""Quantum thick morphisms and quantized symplectic micromorphisms.

The oscillatory integrals collapse, for formal data, to substitution rules:
a function ``F(x1, p2)`` placed in front of the phase acts as the operator
``F(x1, -i*hbar*d)``.  Since all such operators have coefficients that do not
depend on the integration variable, they commute and can be multiplied as
ordinary series in a placeholder for ``d`` (the target momenta are reused for
that purpose).
"""

from __future__ import annotations

from dataclasses import dataclass

from mfc.diffop import mi_factorial, multi_indices
from mfc.errors import InvalidGeneratingFunction, MathDomainError, NotInSymbolClass, SpaceMismatch
from mfc.geometry import Connection, PolyMap, Space, exp_map
from mfc.hbar import HbarOperator, full_symbol
from mfc.ring import (
    HBAR,
    HBAR_KIND,
    I,
    MOMENTUM,
    SeriesElement,
    Substitution,
    TruncationPolicy,
    series_exp,
)


def _p_order_ok(f: SeriesElement, target: Space) -> bool:
    ps = set(target.momenta)
    return all(sum(e for v, e in m if v in ps) >= 2 for m in f.terms)


def _check_symbol_vars(f: SeriesElement, source: Space, target: Space, what: str) -> SeriesElement:
    allowed = set(source.positions) | set(target.momenta) | {HBAR}
    bad = [v.name for v in f.free_variables() if v not in allowed]
    if bad:
        raise SpaceMismatch(f"{what}: {', '.join(bad)} are not coordinates of {source.name} or momenta of {target.name}")
    v = f.valuation(HBAR)
    if v is not None and v < 0:
        raise MathDomainError(f"{what} must have nonnegative hbar powers")
    return f.with_variables(source.positions + target.momenta)


@dataclass(frozen=True, eq=False)
class GeneratingFunction:
    """``S(x1, p2) = S0(x1) + phi^i(x1) p_i + S+(x1, p2)`` with S+ of p-order >= 2."""

    s0: SeriesElement
    phi: PolyMap
    splus: SeriesElement

    def __post_init__(self):
        src, tgt = self.phi.source, self.phi.target
        object.__setattr__(self, "s0", src.function(self.s0))
        sp = _check_symbol_vars(self.splus, src, tgt, "S+")
        if not _p_order_ok(sp, tgt):
            raise InvalidGeneratingFunction("not a valid S+: terms of order < 2 in the momenta")
        object.__setattr__(self, "splus", sp)

    @property
    def source(self) -> Space:
        return self.phi.source

    @property
    def target(self) -> Space:
        return self.phi.target

    @classmethod
    def decompose(cls, S: SeriesElement, source: Space, target: Space) -> GeneratingFunction:
        """Split a generating function by degree in the momenta."""
        S = _check_symbol_vars(S, source, target, "S")
        ps = target.momenta
        parts = S.split(ps)
        s0 = parts.get((), SeriesElement.zero(source.positions))
        comps = [parts.get(((p, 1),), SeriesElement.zero(source.positions)) for p in ps]
        splus = SeriesElement.zero(source.positions + ps)
        for mono, c in parts.items():
            if sum(e for _, e in mono) >= 2:
                splus = splus + c * SeriesElement(({mono: 1}))
        return cls(s0, PolyMap(source, target, tuple(comps)), splus)

    def full(self) -> SeriesElement:
        out = self.s0 + self.splus
        for c, p in zip(self.phi.components, self.target.momenta):
            out = out + c * SeriesElement.var(p)
        return out


@dataclass(frozen=True, eq=False)
class MicromorphismData:
    """Carrier, phase ``Sbar+`` (zero of order two in p), amplitude ``H`` and a connection."""

    carrier: PolyMap
    sbar_plus: SeriesElement
    amplitude: SeriesElement
    connection: Connection | None = None

    def __post_init__(self):
        src, tgt = self.carrier.source, self.carrier.target
        sb = _check_symbol_vars(SeriesElement.zero() + self.sbar_plus, src, tgt, "Sbar+")
        if HBAR in sb.free_variables():
            raise InvalidGeneratingFunction("Sbar+ is an hbar-independent function on phi^* T^* M2")
        if not _p_order_ok(sb, tgt):
            raise InvalidGeneratingFunction("not a valid S+: Sbar+ must vanish to order two at p = 0")
        object.__setattr__(self, "sbar_plus", sb)
        object.__setattr__(self, "amplitude", _check_symbol_vars(SeriesElement.zero() + self.amplitude, src, tgt, "H"))
        conn = self.connection
        if conn is None:
            conn = Connection.flat(tgt)
        elif conn.space != tgt:
            raise SpaceMismatch(f"space mismatch: connection on {conn.space.name}, carrier targets {tgt.name}")
        object.__setattr__(self, "connection", conn)


def _as_d_operator(f: SeriesElement, target: Space) -> SeriesElement:
    """``f(x1, p) -> f(x1, -i*hbar*d)`` with the momenta standing for ``d``."""
    mih = SeriesElement({((HBAR, 1),): -I})
    return Substitution({p: mih * SeriesElement.var(p) for p in target.momenta})(f)


def _phase_exponential(splus: SeriesElement, target: Space, nh: int | None) -> SeriesElement:
    """``exp((i/hbar) S+(x1, -i*hbar*d))`` truncated at hbar-degree ``nh``."""
    t = _as_d_operator(splus, target) * SeriesElement({((HBAR, -1),): I})
    if t.is_zero():
        return SeriesElement.constant(1, t.variables)
    if nh is None:
        raise MathDomainError("expanding the phase exponential needs a finite hbar truncation")
    return series_exp(t, {HBAR_KIND: 1}, nh)


def _split_s0(s0: SeriesElement, nh: int | None):
    """Return (phase flag, formal prefactor exp((i/hbar) * rest)) with rest = O(hbar^2)."""
    low = s0.filter(lambda m: dict(m).get(HBAR, 0) <= 1)
    rest = s0 - low
    if rest.is_zero():
        pref = SeriesElement.constant(1, s0.variables)
    else:
        if nh is None:
            raise MathDomainError("expanding exp((i/hbar) S0) needs a finite hbar truncation")
        pref = series_exp(rest * SeriesElement({((HBAR, -1),): I}), {HBAR_KIND: 1}, nh)
    return (None if low.is_zero() else low), pref


def _table_from_d_series(a: SeriesElement, target: Space) -> dict:
    ps = target.momenta
    table = {}
    for mono, c in a.split(ps).items():
        e = dict(mono)
        table[tuple(e.get(p, 0) for p in ps)] = c
    return table


def thick_pullback(S: GeneratingFunction, nh: int | None) -> HbarOperator:
    """``L = exp((i/hbar) S0) * exp((i/hbar) S+(x1, -i*hbar*d))`` followed by ``x2 = phi_hbar(x1)``."""
    tgt = S.target
    phase, pref = _split_s0(S.s0, nh)
    a = _phase_exponential(S.splus, tgt, nh) * pref
    if nh is not None:
        a = a.truncate(TruncationPolicy(hbar=nh))
    return HbarOperator(S.phi, _table_from_d_series(a, tgt), nh, phase)


def _collect_through_exp(a: SeriesElement, carrier: PolyMap, conn: Connection, nh, nv) -> dict:
    """Apply ``a(x1, d_v)`` to ``g(exp_{phi(x1)} v)`` at ``v = 0`` and read off the jet coefficients."""
    tgt = carrier.target
    table = _table_from_d_series(a, tgt)
    if conn.is_flat:
        return table
    need = max((sum(b) for b in table), default=0)
    if nv is None:
        nv = need
    elif nv < need:
        raise ValueError(f"velocity order {nv} is below the {need} required by the hbar truncation")
    em = exp_map(conn, nv)
    sub = carrier.substitution()
    w = [sub(d) for d in em.displacement()]
    vs = tgt.velocities
    vpol = TruncationPolicy(velocity=nv)
    out: dict = {}
    for gamma in multi_indices(tgt.dim, need):
        pg = SeriesElement.constant(1, vs).with_policy(vpol)
        for k, g in enumerate(gamma):
            for _ in range(g):
                pg = (pg * w[k]).truncate(vpol)
        if pg.is_zero():
            continue
        by_v = pg.split(vs)
        acc = None
        for beta, ab in table.items():
            key = tuple((vs[k], b) for k, b in enumerate(beta) if b)
            c = by_v.get(key)
            if c is None:
                continue
            t = ab * c.scale(mi_factorial(beta)) * (SeriesElement.constant(1) / mi_factorial(gamma))
            acc = t if acc is None else acc + t
        if acc is not None and not acc.is_zero():
            out[gamma] = acc.with_policy(TruncationPolicy(hbar=nh)) if nh is not None else acc.with_policy(TruncationPolicy())
    return out


def invariant_thick_pullback(s0, sbar_plus, phi: PolyMap, conn: Connection | None, nh: int | None,
                             nv: int | None = None) -> HbarOperator:
    """``exp((i/hbar) S0) [exp((i/hbar) Sbar+(x1, -i*hbar*d_v)) g(exp_{phi(x1)} v)]_{v=0}``."""
    src, tgt = phi.source, phi.target
    conn = Connection.flat(tgt) if conn is None else conn
    sb = _check_symbol_vars(SeriesElement.zero() + sbar_plus, src, tgt, "Sbar+")
    if not _p_order_ok(sb, tgt):
        raise InvalidGeneratingFunction("not a valid S+: terms of order < 2 in the momenta")
    phase, pref = _split_s0(src.function(s0), nh)
    a = _phase_exponential(sb, tgt, nh) * pref
    if nh is not None:
        a = a.truncate(TruncationPolicy(hbar=nh))
    return HbarOperator(phi, _collect_through_exp(a, phi, conn, nh, nv), nh, phase)


def quantize_micromorphism(data: MicromorphismData, nh: int | None, nv: int | None = None) -> HbarOperator:
    """``[exp((i/hbar) Sbar+(x1, -i*hbar*d_v)) H(x1, -i*hbar*d_v) g(exp_{phi(x1)} v)]_{v=0}``."""
    tgt = data.carrier.target
    a = _phase_exponential(data.sbar_plus, tgt, nh) * _as_d_operator(data.amplitude, tgt)
    if nh is not None:
        a = a.truncate(TruncationPolicy(hbar=nh))
    return HbarOperator(data.carrier, _collect_through_exp(a, data.carrier, data.connection, nh, nv), nh)


def micromorphism_from_operator(L: HbarOperator, conn: Connection | None = None) -> MicromorphismData:
    """Canonical data ``(Sbar+ = 0, H = full symbol, carrier)`` reproducing ``L`` (flat connection)."""
    if conn is not None and not conn.is_flat:
        raise MathDomainError("recovering micromorphism data is only supported for a flat connection")
    H = full_symbol(L)
    v = H.valuation(HBAR)
    if v is not None and v < 0:
        raise NotInSymbolClass("not-in-symbol-class: the full symbol has negative hbar powers")
    return MicromorphismData(L.carrier, SeriesElement.zero(), H, conn)


def operator_over_thick(splus: SeriesElement, amplitude: SeriesElement, carrier: PolyMap, nh: int) -> HbarOperator:
    """``[exp((i/hbar) S+(x1, (hbar/i) d)) H(x1, (hbar/i) d) g]_{x2 = phi_hbar(x1)}``."""
    tgt = carrier.target
    sp = _check_symbol_vars(SeriesElement.zero() + splus, carrier.source, tgt, "S+")
    if not _p_order_ok(sp, tgt):
        raise InvalidGeneratingFunction("not a valid S+: terms of order < 2 in the momenta")
    h = _check_symbol_vars(SeriesElement.zero() + amplitude, carrier.source, tgt, "H")
    a = (_phase_exponential(sp, tgt, nh) * _as_d_operator(h, tgt)).truncate(TruncationPolicy(hbar=nh))
    return HbarOperator(carrier, _table_from_d_series(a, tgt), nh)


def thick_symbol_of_operator_over_thick(splus: SeriesElement, amplitude: SeriesElement, nh: int,
                                        np: int | None = None) -> tuple:
    """The two candidate symbols ``H`` and ``H * exp((i/hbar) S+)``.

    The exponential is truncated at degree ``nh`` (hbar power plus momentum
    degree) and, if given, at momentum degree ``np``.
    """
    weights = {HBAR_KIND: 1, MOMENTUM: 1}
    phase = SeriesElement.zero() + splus * SeriesElement({((HBAR, -1),): I})
    e = series_exp(phase, weights, nh) if not phase.is_zero() else SeriesElement.constant(1)
    second = (SeriesElement.zero() + amplitude) * e
    second = second.truncate_weighted(weights, nh)
    if np is not None:
        second = second.truncate(TruncationPolicy(momentum=np))
    return SeriesElement.zero() + amplitude, second
