"""Exception hierarchy shared by all unitailkit modules."""


class UnitailError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(UnitailError, ValueError):
    """Degenerate polygon, singular system, or other geometric failure."""


class ExteriorPointError(GeometryError):
    """A point expected strictly inside a quadrilateral is not."""


class ParameterError(UnitailError, ValueError):
    """An argument is outside its documented domain."""


class DataFormatError(UnitailError, ValueError):
    """A file or buffer does not conform to its documented format."""
