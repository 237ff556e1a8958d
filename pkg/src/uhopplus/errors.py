"""Exception hierarchy. Everything derives from ValueError so callers can catch broadly."""


class HopfieldError(ValueError):
    pass


class ZeroVectorError(HopfieldError):
    pass


class DimensionMismatchError(HopfieldError):
    pass


class BadMagicError(HopfieldError):
    pass


class TruncatedFileError(HopfieldError):
    pass


class EmptySelectionError(HopfieldError):
    pass


class NonFiniteError(HopfieldError):
    pass


class BisectionNoConvergeError(HopfieldError, ArithmeticError):
    pass


class IndexOutOfRangeError(HopfieldError, IndexError):
    pass


class ZeroImageError(HopfieldError):
    pass


class SinglePatternError(HopfieldError):
    pass


class ZeroMatrixError(HopfieldError):
    pass


class OutOfDomainError(HopfieldError):
    pass


class InvalidLogArgumentError(HopfieldError):
    pass


class DegenerateRadiusError(HopfieldError):
    pass


class SinglePointError(HopfieldError):
    pass


class NotOnSimplexError(HopfieldError):
    pass


class NotPlanarError(HopfieldError):
    pass


class UnknownPresetError(HopfieldError, KeyError):
    pass
