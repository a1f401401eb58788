"""Exception hierarchy.

Data problems derive from ``DataError`` and numeric breakdowns from
``NumericError`` so the CLI can map them onto exit codes 3 and 4.
"""


class SSRegError(Exception):
    pass


class DimensionMismatch(SSRegError, ValueError):
    pass


class NotPositiveDefinite(SSRegError, ArithmeticError):
    def __init__(self, index, pivot):
        super().__init__(f"non-positive pivot {pivot!r} at index {index}")
        self.index = index
        self.pivot = pivot


class NumericError(SSRegError, ArithmeticError):
    pass


class EigenNonConvergence(NumericError):
    pass


class NegativeWeight(SSRegError, ValueError):
    pass


class NonPositiveResponse(SSRegError, ValueError):
    pass


class NegativeCount(SSRegError, ValueError):
    pass


class GridMismatch(SSRegError, ValueError):
    pass


class EmptyAccumulator(SSRegError, ValueError):
    pass


class NonPositiveVariance(SSRegError, ValueError):
    pass


class NegativeLambda(SSRegError, ValueError):
    pass


class InverseTransformDomain(SSRegError, ValueError):
    pass


class DataError(SSRegError, ValueError):
    pass


class ArtifactError(SSRegError, ValueError):
    pass
