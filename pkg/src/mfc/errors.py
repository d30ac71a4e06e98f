"""Exception hierarchy shared by all modules.

Semantic errors (wrong spaces, unknown names) subclass ``ValueError``;
failures of a mathematical precondition subclass ``MathDomainError``.
"""

from __future__ import annotations


class SpaceMismatch(ValueError):
    """Objects that live on different coordinate spaces were combined."""


class VariableSpaceMismatch(SpaceMismatch):
    """Two distinct variables share a display name in one expression."""


class UnknownVariable(ValueError):
    pass


class MathDomainError(ArithmeticError):
    """A mathematical operation was asked for outside its domain."""


class DivergentSubstitution(MathDomainError):
    pass


class NonInvertibleJet(MathDomainError):
    pass


class NotInSymbolClass(MathDomainError):
    pass


class NonFormalPhase(MathDomainError):
    """The operator carries an exponential prefactor that is not a series in hbar."""


class SquareNotCommuting(MathDomainError):
    pass


class SymbolsDoNotMatch(MathDomainError):
    pass


class InvalidGeneratingFunction(MathDomainError):
    pass
