"""Exception hierarchy shared by all ifvc modules."""


class CodecError(Exception):
    """Base class for every structured error raised by this package."""


class ParseError(CodecError):
    """A trace or model file is syntactically malformed."""


class ValidationError(CodecError):
    """A value violates a semantic-parameter invariant."""


class DecodeError(CodecError):
    """An entropy-coded payload is truncated or internally inconsistent."""


class ContainerError(CodecError):
    """A coded stream container is corrupt, truncated, or unsupported."""


class DimensionError(CodecError):
    """Coefficient or image dimensions do not match the loaded model/stream."""


class DegenerateError(CodecError):
    """Geometry is degenerate (no visible vertices, collinear anchors, ...)."""


class RangeError(CodecError):
    """A scalar argument lies outside its documented range."""
