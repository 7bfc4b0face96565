"""Exception types raised by the solvers and model checks."""


class FkError(Exception):
    """Base class for all fkwaves errors."""


class ConfigError(FkError):
    """Run-config document violates the schema; carries the offending key path."""

    def __init__(self, message, key_path=""):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class DomainError(FkError):
    """A box-only nonlinearity was evaluated outside [0,1]^(N+1)."""


class ExtensionError(FkError):
    """Nonlinearity cannot be extended (F(0,...,0) != F(1,...,1))."""


class NotBistableError(FkError):
    """f has no interior sign change in (0,1)."""


class AmbiguousRootError(FkError):
    """f has more than one interior sign change in (0,1)."""


class GateError(FkError):
    """An assumption gate required by the requested operation failed."""


class StencilError(FkError):
    """Lattice evaluation requested with a non-integer shift stencil."""


class BlowUpError(FkError):
    """Time integration produced a non-finite value."""

    def __init__(self, t, index):
        self.t = t
        self.index = index
        super().__init__(f"non-finite state at t={t:.6g}, site index {index}")


class NoFrontError(FkError):
    """No level crossing exists in the current state."""


class NonMonotoneFrontError(FkError):
    """State is not monotone enough for a unique level crossing."""


class InsufficientDataError(FkError):
    """Too few samples for the requested measurement."""


class ConvergenceError(FkError):
    """Iteration did not converge; carries last diagnostics."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class PinnedSuspectedError(FkError):
    """Solve failed in a way typical of the pinned regime (c -> 0)."""


class NoStationaryProfileError(FkError):
    """Stationary fixed-point iteration diverged (depinned regime suspected)."""


class DomainTooSmallError(FkError):
    """Profile domain cannot hold the front; enlarge [z_min, z_max]."""


class CoverageError(FkError):
    """Lattice samples do not cover the requested z-range."""
