"""Exception hierarchy shared by all modules."""


class IsoDGError(Exception):
    """Base class for every error raised by :mod:`isodg`."""


# mesh / io
class MeshError(IsoDGError):
    pass


class UnsupportedFormat(MeshError):
    pass


class MixedElementTypes(MeshError):
    pass


class DanglingVertexReference(MeshError):
    pass


class ProjectionFailure(MeshError):
    pass


# numerics
class NumericalError(IsoDGError):
    """Failures that the CLI maps to exit code 3."""


class DegenerateMap(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class MaxIterationsExceeded(NumericalError):
    """Krylov solve hit the iteration cap; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnsupportedDegree(IsoDGError, ValueError):
    pass


class NonUnitDirection(IsoDGError, ValueError):
    pass


class MissingExactSolution(IsoDGError, ValueError):
    pass


class LengthMismatch(IsoDGError, ValueError):
    pass


class NonpositiveError(IsoDGError, ValueError):
    pass


class ConfigParseError(IsoDGError):
    """Malformed study configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
