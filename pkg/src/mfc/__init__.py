"""Exact symbolic calculus of hbar-differential operators over maps."""

from __future__ import annotations

from mfc.diffop import OperatorOverMap, apply, compose, order_oracle
from mfc.geometry import Connection, CoordinateChange, PolyMap, Space, compose_maps, exp_map, jacobian
from mfc.hbar import (
    HbarOperator,
    degree,
    full_symbol,
    hbar_apply,
    hbar_compose,
    hbar_order_oracle,
    principal_symbol,
    transform_coordinates,
)
from mfc.micro import (
    GeneratingFunction,
    MicromorphismData,
    invariant_thick_pullback,
    micromorphism_from_operator,
    quantize_micromorphism,
    thick_pullback,
)
from mfc.ring import HBAR, I, GaussianRational, SeriesElement, Substitution, TruncationPolicy
from mfc.symbols import CommSquare, SymbolFunction, check_symbprod, square_bracket, square_delta

__version__ = "0.1.0"

__all__ = [
    "HBAR",
    "I",
    "CommSquare",
    "Connection",
    "CoordinateChange",
    "GaussianRational",
    "GeneratingFunction",
    "HbarOperator",
    "MicromorphismData",
    "OperatorOverMap",
    "PolyMap",
    "SeriesElement",
    "Space",
    "Substitution",
    "SymbolFunction",
    "TruncationPolicy",
    "apply",
    "check_symbprod",
    "compose",
    "compose_maps",
    "degree",
    "exp_map",
    "full_symbol",
    "hbar_apply",
    "hbar_compose",
    "hbar_order_oracle",
    "invariant_thick_pullback",
    "jacobian",
    "micromorphism_from_operator",
    "order_oracle",
    "principal_symbol",
    "quantize_micromorphism",
    "square_bracket",
    "square_delta",
    "thick_pullback",
    "transform_coordinates",
]
