"""Exception types raised across the package."""


class QMCError(Exception):
    """Base class for all package errors."""


class ShapeError(QMCError, ValueError):
    """Subsystem dimensions or labels do not match the operands."""


class ValidationError(QMCError, ValueError):
    """An operand fails a state/channel/algebra validity check."""


class NoFaithfulStateError(QMCError):
    """The channel has no full-rank invariant state on its ambient space."""


class AlgebraError(QMCError):
    """A block decomposition of an operator algebra could not be certified."""


class NotMarkovError(QMCError):
    """The tripartite state does not saturate strong subadditivity."""

    def __init__(self, message, cmi=None, residual=None):
        super().__init__(message)
        self.cmi = cmi
        self.residual = residual


class FactorizationError(QMCError):
    """A block that should be a product state is not one within tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreservationError(QMCError):
    """A channel moves a state it was required to leave invariant."""
