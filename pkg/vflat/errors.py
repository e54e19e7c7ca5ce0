from typing import Optional


class VflatError(Exception):
    """Base class for every error raised by the vflat package."""


class InstanceError(VflatError, ValueError):
    """Malformed instance document or an instance that fails validation."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class RetentionError(VflatError, ValueError):
    """A level was requested that the value stack did not keep."""


class OutsideBoxError(VflatError, ValueError):
    """A right-hand side lies outside the lattice box."""


class ValueOverflowError(VflatError, OverflowError):
    """A table value or the cell count left the signed 64-bit range."""

    def __init__(self, message: str, beta: Optional[tuple] = None):
        super().__init__(message)
        self.beta = beta


class EnumerationCapError(VflatError):
    """The brute-force oracle refused a search larger than its cap."""


class TruncatedOptimaError(VflatError):
    """An optima enumeration hit its cap, so a 'for all optima' claim can't be certified."""


class PreconditionError(VflatError, ValueError):
    """The operation declines: its hypothesis does not hold, no claim is made."""


class DifferentComponentsError(PreconditionError):
    """Two points lie in different MC-level components."""


class PropertyViolation(VflatError, AssertionError):
    """An identity that must hold on the tables did not. Carries a witness."""

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness or {}
