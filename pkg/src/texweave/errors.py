"""Exception hierarchy shared across texweave modules."""


class TexweaveError(Exception):
    pass


class ParseError(TexweaveError):
    pass


class MissingUv(ParseError):
    pass


class EmptyMesh(TexweaveError):
    pass


class ResolutionTooSmall(TexweaveError):
    pass


class MismatchedResolutions(TexweaveError):
    pass


class DomainError(TexweaveError, ValueError):
    pass


class NoNeighbors(TexweaveError):
    pass


class NoPaintedSeed(TexweaveError):
    pass


class UnpaintedPoints(TexweaveError):
    pass


class NoNonSeamPoints(TexweaveError):
    pass


class UpscalerMismatch(TexweaveError):
    pass


class UnknownField(TexweaveError, KeyError):
    pass


class ManifestError(TexweaveError):
    pass
