"""Exception types.

Two families matter to callers: `ValidationError` for bad input (CLI exit
code 2) and `NumericalError` for computations that cannot be trusted
(CLI exit code 3).
"""


class SublapError(Exception):
    pass


class ValidationError(SublapError, ValueError):
    pass


class NumericalError(SublapError, ArithmeticError):
    pass


# group_core
class NotAntisymmetric(ValidationError):
    pass


class NotStratified(ValidationError):
    pass


class UnknownName(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class OddDimension(ValidationError):
    pass


class NotSkew(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class AmbiguousClassification(NumericalError):
    pass


# spectral
class ZeroEta(ValidationError):
    pass


class ZeroMatrix(ValidationError):
    pass


class ClusterAmbiguous(NumericalError):
    pass


class SingularEta(NumericalError):
    pass


class InconsistentProfiles(NumericalError):
    pass


class RepeatedEigenvalue(NumericalError):
    pass


# laguerre_kernel
class GridTooCoarse(ValidationError):
    pass


class NonDecayingSamples(NumericalError):
    pass


# decomposition
class MeshTooCoarse(NumericalError):
    pass


class BadParameters(ValidationError):
    pass


class NotUnit(ValidationError):
    pass


# harness
class DegenerateFit(NumericalError):
    pass
