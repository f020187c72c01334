"""Exception hierarchy. Every library error derives from ``ManinError``."""


class ManinError(Exception):
    """Base class for all library errors."""


# algebra
class JacobiViolation(ManinError):
    pass


class MetricDegenerate(ManinError):
    pass


class AdInvarianceViolation(ManinError):
    pass


class DimensionMismatch(ManinError):
    pass


class NotComplementary(ManinError):
    pass


class NotLagrangian(ManinError):
    pass


# groups
class LogDomain(ManinError):
    pass


class OffManifold(ManinError):
    pass


class BasisExpansionFailure(ManinError):
    pass


class NotTangent(ManinError):
    pass


# calculus
class StepUnderflow(ManinError):
    pass


class OutOfChart(ManinError):
    pass


class IllConditioned(ManinError):
    pass


# linear Dirac geometry
class NonCleanComposition(ManinError):
    pass


class ExistenceFailure(ManinError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class UniquenessFailure(ManinError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ActionNotTransitive(ManinError):
    pass


# targets
class ComplementNotInvariant(ManinError):
    pass


class SolveSingular(ManinError):
    pass


class NotInvariant(ManinError):
    pass


class NotConnection(ManinError):
    pass


class NotBasic(ManinError):
    pass


# Hamiltonian spaces
class AxiomFailure(ManinError):
    def __init__(self, axiom, residual, point=None, tolerance=None):
        msg = f"axiom {axiom} failed: residual {residual:.3e}"
        if tolerance is not None:
            msg += f" > {tolerance:.1e}"
        super().__init__(msg)
        self.axiom = axiom
        self.residual = residual
        self.point = point
        self.tolerance = tolerance


class ModelMismatch(ManinError):
    pass


class FactorStructureMismatch(ManinError):
    pass


class NotFree(ManinError):
    pass


class SectionOutOfChart(ManinError):
    pass


class NotRegularValue(ManinError):
    pass


class NewtonDivergence(ManinError):
    pass


# moduli
class UnsolvableRelation(ManinError):
    pass


class ColoringInvalid(ManinError):
    pass


class InvalidAttachment(ManinError):
    pass


class PresentationMismatch(ManinError):
    pass


class NotRegular(ManinError):
    pass


# cli / reports
class RecipeParseError(ManinError):
    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.position = position


class UnknownModel(ManinError):
    pass


class IOFailure(ManinError):
    pass
