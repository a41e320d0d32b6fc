"""Exception types shared across the package.

Every error raised while interpreting a model file carries an optional
``path`` into the source document (JSON-pointer-ish, e.g. ``/transitions/2``)
so that callers always get a location with the message.
"""

from __future__ import annotations


class FssmError(Exception):
    """Base class for all model construction and analysis errors."""

    def __init__(self, message: str, *, path: str | None = None):
        super().__init__(message)
        self.path = path

    def __str__(self) -> str:
        base = super().__str__()
        return f"{self.path}: {base}" if self.path else base


# -- lattice construction ---------------------------------------------------

class DuplicateLevel(FssmError):
    pass


class UnknownLevel(FssmError):
    pass


class OrderCycle(FssmError):
    pass


class NotALattice(FssmError):
    """Raised with a witness pair that has no unique LUB or GLB."""

    def __init__(self, message: str, witness: tuple[str, str] | None = None, **kw):
        super().__init__(message, **kw)
        self.witness = witness


# -- net structure ----------------------------------------------------------

class DuplicateId(FssmError):
    pass


class DanglingReference(FssmError):
    pass


class EmptyTransition(FssmError):
    pass


class InitialContainmentViolation(FssmError):
    pass


# -- operational semantics --------------------------------------------------

class NotEnabled(FssmError):
    pass


class CapacityExceeded(FssmError):
    pass


class LimitExceeded(FssmError):
    pass


# -- policies and observation ----------------------------------------------

class UnresolvedReference(FssmError):
    pass


class UnmappedTransition(FssmError):
    pass


class CyclicGraph(FssmError):
    pass


class DepthTooSmall(FssmError):
    pass


# -- workflow allocation ----------------------------------------------------

class InvalidWorkflow(FssmError):
    pass


class UnknownTask(FssmError):
    pass


class TooManyAllocations(FssmError):
    def __init__(self, message: str, count: int | None = None, **kw):
        super().__init__(message, **kw)
        self.count = count


class NoFeasibleAllocation(FssmError):
    pass


class InvalidAllocation(FssmError):
    pass


# -- model files --------------------------------------------------------------

class ModelSyntaxError(FssmError):
    def __init__(self, message: str, line: int, column: int, **kw):
        super().__init__(message, **kw)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {super(FssmError, self).__str__()}"


class SchemaError(FssmError):
    pass
