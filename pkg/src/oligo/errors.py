"""Exception types shared across the package."""


class OligoError(Exception):
    """Base class for all package errors."""


class BoundExceeded(OligoError):
    """A request went past the bound of an explicit-age presentation."""


class TupleNotInAge(OligoError):
    """A concrete tuple induces a structure that the presentation forbids."""


class SortMismatch(OligoError):
    """Two imaginaries that should share a sort do not."""


class ResourceLimit(OligoError):
    """A configured cap (element count, subset count, ...) was hit."""


class EmptyFamily(OligoError):
    """A subgroup-family policy produced no subgroups."""


class CapExceeded(OligoError):
    """A fragment query needs data outside the fragment's caps."""


class ParseError(OligoError):
    """Presentation file is not grammatical."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = "" if line is None else f" (line {line}" + ("" if column is None else f", col {column}") + ")"
        super().__init__(message + loc)


class ValidationError(OligoError):
    """Presentation file parsed but violates an invariant."""
